#include "core/tensor.hpp"

#include <Eigen/Dense>

namespace bnnkit {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Data: return "data";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Format: return "format";
        case ErrorKind::Integrity: return "integrity";
        case ErrorKind::Version: return "version";
        case ErrorKind::NotFound: return "not-found";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Consistency: return "consistency";
        case ErrorKind::Config: return "config";
        case ErrorKind::Protocol: return "protocol";
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Stall: return "stall";
    }
    return "unknown";
}

namespace {

template <class T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<EigenMat<T>>;
template <class T>
using MapC = Eigen::Map<const EigenMat<T>>;

template <class T>
void check_matmul_dims(const TensorT<T>& a, const TensorT<T>& b, int64_t ak, int64_t bk) {
    if (a.rank() != 2 || b.rank() != 2)
        fail(ErrorKind::Dimension,
             "matmul: expected rank-2 operands, got " + a.shape_str() + " and " + b.shape_str());
    if (ak != bk)
        fail(ErrorKind::Dimension,
             "matmul: inner dimensions disagree, " + a.shape_str() + " x " + b.shape_str());
}

} // namespace

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    check_matmul_dims(a, b, a.rank() == 2 ? a.shape[1] : -1, b.rank() == 2 ? b.shape[0] : -2);
    int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    TensorT<T> c({m, n});
    MapM<T>(c.ptr(), m, n).noalias() = MapC<T>(a.ptr(), m, k) * MapC<T>(b.ptr(), k, n);
    return c;
}

template <class T>
TensorT<T> matmul_tn(const TensorT<T>& a, const TensorT<T>& b) {
    check_matmul_dims(a, b, a.rank() == 2 ? a.shape[0] : -1, b.rank() == 2 ? b.shape[0] : -2);
    int64_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    TensorT<T> c({m, n});
    MapM<T>(c.ptr(), m, n).noalias() =
        MapC<T>(a.ptr(), k, m).transpose() * MapC<T>(b.ptr(), k, n);
    return c;
}

template <class T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
    check_matmul_dims(a, b, a.rank() == 2 ? a.shape[1] : -1, b.rank() == 2 ? b.shape[1] : -2);
    int64_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    TensorT<T> c({m, n});
    MapM<T>(c.ptr(), m, n).noalias() =
        MapC<T>(a.ptr(), m, k) * MapC<T>(b.ptr(), n, k).transpose();
    return c;
}

Conv2dGeom conv2d_geometry(const std::vector<int64_t>& xs, const std::vector<int64_t>& ks,
                           int64_t stride, Padding padding) {
    if (xs.size() != 4 || ks.size() != 4)
        fail(ErrorKind::Dimension, "conv2d: input must be [B,H,W,Cin], kernel [kh,kw,Cin,Cout]");
    if (stride < 1) fail(ErrorKind::Parameter, "conv2d: stride must be >= 1");
    Conv2dGeom g{};
    g.batch = xs[0]; g.in_h = xs[1]; g.in_w = xs[2]; g.in_c = xs[3];
    g.kh = ks[0]; g.kw = ks[1]; g.out_c = ks[3];
    g.stride = stride;
    if (ks[2] != g.in_c)
        fail(ErrorKind::Dimension, "conv2d: kernel expects " + std::to_string(ks[2]) +
                                       " input channels, input has " + std::to_string(g.in_c));
    if (padding == Padding::Valid) {
        g.pad_top = g.pad_left = 0;
        if (g.kh > g.in_h || g.kw > g.in_w)
            fail(ErrorKind::Dimension, "conv2d: kernel " + std::to_string(g.kh) + "x" +
                                           std::to_string(g.kw) + " larger than input " +
                                           std::to_string(g.in_h) + "x" + std::to_string(g.in_w));
        g.out_h = (g.in_h - g.kh) / stride + 1;
        g.out_w = (g.in_w - g.kw) / stride + 1;
    } else {
        g.out_h = (g.in_h + stride - 1) / stride;
        g.out_w = (g.in_w + stride - 1) / stride;
        int64_t ph = std::max<int64_t>((g.out_h - 1) * stride + g.kh - g.in_h, 0);
        int64_t pw = std::max<int64_t>((g.out_w - 1) * stride + g.kw - g.in_w, 0);
        g.pad_top = ph / 2;
        g.pad_left = pw / 2;
        if (g.kh > g.in_h + ph || g.kw > g.in_w + pw)
            fail(ErrorKind::Dimension, "conv2d: kernel larger than padded input");
    }
    return g;
}

namespace {

// im2col: patches laid out [B*H'*W', kh*kw*Cin]; out-of-bounds reads are zero
template <class T>
TensorT<T> im2col(const TensorT<T>& x, const Conv2dGeom& g) {
    int64_t cols = g.kh * g.kw * g.in_c;
    TensorT<T> p({g.batch * g.out_h * g.out_w, cols});
    int64_t row = 0;
    for (int64_t b = 0; b < g.batch; ++b) {
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
            int64_t ih0 = oh * g.stride - g.pad_top;
            for (int64_t ow = 0; ow < g.out_w; ++ow, ++row) {
                int64_t iw0 = ow * g.stride - g.pad_left;
                T* dst = p.ptr() + row * cols;
                for (int64_t dh = 0; dh < g.kh; ++dh) {
                    int64_t ih = ih0 + dh;
                    if (ih < 0 || ih >= g.in_h) { dst += g.kw * g.in_c; continue; }
                    for (int64_t dw = 0; dw < g.kw; ++dw) {
                        int64_t iw = iw0 + dw;
                        if (iw < 0 || iw >= g.in_w) { dst += g.in_c; continue; }
                        const T* src = x.ptr() + ((b * g.in_h + ih) * g.in_w + iw) * g.in_c;
                        std::copy(src, src + g.in_c, dst);
                        dst += g.in_c;
                    }
                }
            }
        }
    }
    return p;
}

template <class T>
void col2im_add(const TensorT<T>& p, const Conv2dGeom& g, TensorT<T>& x) {
    int64_t cols = g.kh * g.kw * g.in_c;
    int64_t row = 0;
    for (int64_t b = 0; b < g.batch; ++b) {
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
            int64_t ih0 = oh * g.stride - g.pad_top;
            for (int64_t ow = 0; ow < g.out_w; ++ow, ++row) {
                int64_t iw0 = ow * g.stride - g.pad_left;
                const T* src = p.ptr() + row * cols;
                for (int64_t dh = 0; dh < g.kh; ++dh) {
                    int64_t ih = ih0 + dh;
                    if (ih < 0 || ih >= g.in_h) { src += g.kw * g.in_c; continue; }
                    for (int64_t dw = 0; dw < g.kw; ++dw) {
                        int64_t iw = iw0 + dw;
                        if (iw < 0 || iw >= g.in_w) { src += g.in_c; continue; }
                        T* dst = x.ptr() + ((b * g.in_h + ih) * g.in_w + iw) * g.in_c;
                        for (int64_t c = 0; c < g.in_c; ++c) dst[c] += src[c];
                        src += g.in_c;
                    }
                }
            }
        }
    }
}

} // namespace

template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& kernel, int64_t stride,
                  Padding padding) {
    Conv2dGeom g = conv2d_geometry(x.shape, kernel.shape, stride, padding);
    TensorT<T> patches = im2col(x, g);
    TensorT<T> kmat = kernel.reshaped({g.kh * g.kw * g.in_c, g.out_c});
    TensorT<T> y = matmul(patches, kmat);
    return y.reshaped({g.batch, g.out_h, g.out_w, g.out_c});
}

template <class T>
TensorT<T> conv2d_backward_input(const TensorT<T>& grad_y, const TensorT<T>& kernel,
                                 const Conv2dGeom& g) {
    TensorT<T> gmat = grad_y.reshaped({g.batch * g.out_h * g.out_w, g.out_c});
    TensorT<T> kmat = kernel.reshaped({g.kh * g.kw * g.in_c, g.out_c});
    TensorT<T> dpatches = matmul_nt(gmat, kmat); // [rows, kh*kw*cin]
    TensorT<T> dx({g.batch, g.in_h, g.in_w, g.in_c});
    col2im_add(dpatches, g, dx);
    return dx;
}

template <class T>
TensorT<T> conv2d_backward_kernel(const TensorT<T>& x, const TensorT<T>& grad_y,
                                  const Conv2dGeom& g) {
    TensorT<T> patches = im2col(x, g);
    TensorT<T> gmat = grad_y.reshaped({g.batch * g.out_h * g.out_w, g.out_c});
    TensorT<T> dk = matmul_tn(patches, gmat); // [kh*kw*cin, cout]
    return dk.reshaped({g.kh, g.kw, g.in_c, g.out_c});
}

template <class T>
TensorT<T> maxpool2d(const TensorT<T>& x, int64_t window, int64_t stride,
                     std::vector<int64_t>* argmax) {
    if (x.rank() != 4) fail(ErrorKind::Dimension, "maxpool2d: input must be [B,H,W,C]");
    if (window < 1 || stride < 1) fail(ErrorKind::Parameter, "maxpool2d: window/stride must be >= 1");
    int64_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
    if (window > H || window > W)
        fail(ErrorKind::Dimension, "maxpool2d: window larger than input");
    int64_t OH = (H - window) / stride + 1;
    int64_t OW = (W - window) / stride + 1;
    TensorT<T> y({B, OH, OW, C});
    if (argmax) argmax->assign(static_cast<size_t>(y.size()), 0);
    int64_t idx = 0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t oh = 0; oh < OH; ++oh)
            for (int64_t ow = 0; ow < OW; ++ow)
                for (int64_t c = 0; c < C; ++c, ++idx) {
                    T best{};
                    int64_t best_at = -1;
                    for (int64_t dh = 0; dh < window; ++dh)
                        for (int64_t dw = 0; dw < window; ++dw) {
                            int64_t ih = oh * stride + dh, iw = ow * stride + dw;
                            int64_t at = ((b * H + ih) * W + iw) * C + c;
                            T v = x.data[static_cast<size_t>(at)];
                            if (best_at < 0 || v > best) { best = v; best_at = at; }
                        }
                    y.data[static_cast<size_t>(idx)] = best;
                    if (argmax) (*argmax)[static_cast<size_t>(idx)] = best_at;
                }
    return y;
}

template <class T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_y, const std::vector<int64_t>& argmax,
                              const std::vector<int64_t>& x_shape) {
    if (argmax.size() != static_cast<size_t>(grad_y.size()))
        fail(ErrorKind::Usage, "maxpool2d_backward: argmax cache does not match gradient");
    TensorT<T> dx(x_shape);
    for (int64_t i = 0; i < grad_y.size(); ++i)
        dx.data[static_cast<size_t>(argmax[static_cast<size_t>(i)])] += grad_y.data[static_cast<size_t>(i)];
    return dx;
}

#define BNNKIT_INSTANTIATE(T)                                                                  \
    template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&);                       \
    template TensorT<T> matmul_tn<T>(const TensorT<T>&, const TensorT<T>&);                    \
    template TensorT<T> matmul_nt<T>(const TensorT<T>&, const TensorT<T>&);                    \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, int64_t, Padding);     \
    template TensorT<T> conv2d_backward_input<T>(const TensorT<T>&, const TensorT<T>&,        \
                                                 const Conv2dGeom&);                           \
    template TensorT<T> conv2d_backward_kernel<T>(const TensorT<T>&, const TensorT<T>&,       \
                                                  const Conv2dGeom&);                          \
    template TensorT<T> maxpool2d<T>(const TensorT<T>&, int64_t, int64_t,                      \
                                     std::vector<int64_t>*);                                   \
    template TensorT<T> maxpool2d_backward<T>(const TensorT<T>&, const std::vector<int64_t>&, \
                                              const std::vector<int64_t>&);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
