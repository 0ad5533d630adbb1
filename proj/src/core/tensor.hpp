#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace bnnkit {

// Row-major dense array of float or double. Shapes are dynamic; kernels
// validate them before touching data.
template <class T>
struct TensorT {
    std::vector<int64_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int64_t> s) : shape(std::move(s)), data(count(shape), T{0}) {}
    TensorT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != static_cast<int64_t>(data.size()))
            fail(ErrorKind::Dimension, "tensor data length " + std::to_string(data.size()) +
                                           " does not match shape " + shape_str(shape));
    }

    static int64_t count(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 0) fail(ErrorKind::Dimension, "negative dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

    static TensorT zeros(std::vector<int64_t> s) { return TensorT(std::move(s)); }
    static TensorT full(std::vector<int64_t> s, T v) {
        TensorT t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    // flat accessors for 2d/4d layouts
    T& at2(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    T at2(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
    T& at4(int64_t b, int64_t h, int64_t w, int64_t c) {
        return data[static_cast<size_t>(((b * shape[1] + h) * shape[2] + w) * shape[3] + c)];
    }
    T at4(int64_t b, int64_t h, int64_t w, int64_t c) const {
        return data[static_cast<size_t>(((b * shape[1] + h) * shape[2] + w) * shape[3] + c)];
    }

    TensorT reshaped(std::vector<int64_t> s) const {
        if (count(s) != size())
            fail(ErrorKind::Dimension,
                 "cannot reshape " + shape_str(shape) + " to " + shape_str(s));
        TensorT t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    static std::string shape_str(const std::vector<int64_t>& s) {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }
    std::string shape_str() const { return shape_str(shape); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

enum class Padding { Valid, Same };

// ---- kernels -------------------------------------------------------------

template <class T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b))
        fail(ErrorKind::Dimension, std::string(op) + ": shape mismatch " + a.shape_str() +
                                       " vs " + b.shape_str());
}

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);

// c += a^T * b  (a: [m x k] used as [k x m]); helpers for backward passes
template <class T>
TensorT<T> matmul_tn(const TensorT<T>& a, const TensorT<T>& b);
template <class T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b);

struct Conv2dGeom {
    int64_t batch, in_h, in_w, in_c;
    int64_t kh, kw, out_c;
    int64_t stride;
    int64_t pad_top, pad_left, out_h, out_w;
};

Conv2dGeom conv2d_geometry(const std::vector<int64_t>& x_shape,
                           const std::vector<int64_t>& k_shape, int64_t stride,
                           Padding padding);

// x: [B,H,W,Cin], kernel: [kh,kw,Cin,Cout] -> [B,H',W',Cout], cross-correlation
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& kernel, int64_t stride,
                  Padding padding);
template <class T>
TensorT<T> conv2d_backward_input(const TensorT<T>& grad_y, const TensorT<T>& kernel,
                                 const Conv2dGeom& g);
template <class T>
TensorT<T> conv2d_backward_kernel(const TensorT<T>& x, const TensorT<T>& grad_y,
                                  const Conv2dGeom& g);

template <class T>
TensorT<T> maxpool2d(const TensorT<T>& x, int64_t window, int64_t stride,
                     std::vector<int64_t>* argmax = nullptr);
template <class T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_y, const std::vector<int64_t>& argmax,
                              const std::vector<int64_t>& x_shape);

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (T& v : y.data) v = v > T{0} ? v : T{0};
    return y;
}

template <class T>
TensorT<T> relu_backward(const TensorT<T>& grad_y, const TensorT<T>& x) {
    require_same_shape(grad_y, x, "relu_backward");
    TensorT<T> g = grad_y;
    for (int64_t i = 0; i < g.size(); ++i)
        if (x.data[static_cast<size_t>(i)] <= T{0}) g.data[static_cast<size_t>(i)] = T{0};
    return g;
}

// softmax over the last axis, numerically stable
template <class T>
TensorT<T> softmax(const TensorT<T>& x) {
    if (x.rank() < 1) fail(ErrorKind::Dimension, "softmax: rank-0 input");
    int64_t c = x.shape.back();
    int64_t rows = x.size() / (c > 0 ? c : 1);
    if (c == 0) fail(ErrorKind::Dimension, "softmax: empty last axis");
    TensorT<T> y = x;
    for (int64_t r = 0; r < rows; ++r) {
        T* p = y.ptr() + r * c;
        T mx = p[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, p[j]);
        T sum{0};
        for (int64_t j = 0; j < c; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        for (int64_t j = 0; j < c; ++j) p[j] /= sum;
    }
    return y;
}

template <class T>
T softplus_scalar(T v) {
    // log(1+exp(v)) without overflow for large |v|
    if (v > T{30}) return v;
    if (v < T{-30}) return std::exp(v);
    return std::log1p(std::exp(v));
}

template <class T>
T sigmoid_scalar(T v) {
    if (v >= T{0}) {
        T e = std::exp(-v);
        return T{1} / (T{1} + e);
    }
    T e = std::exp(v);
    return e / (T{1} + e);
}

template <class T>
TensorT<T> softplus(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (T& v : y.data) v = softplus_scalar(v);
    return y;
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    require_same_shape(a, b, "add");
    TensorT<T> y = a;
    for (int64_t i = 0; i < y.size(); ++i) y.data[static_cast<size_t>(i)] += b.data[static_cast<size_t>(i)];
    return y;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    require_same_shape(a, b, "mul");
    TensorT<T> y = a;
    for (int64_t i = 0; i < y.size(); ++i) y.data[static_cast<size_t>(i)] *= b.data[static_cast<size_t>(i)];
    return y;
}

template <class T>
TensorT<T> abs(const TensorT<T>& a) {
    TensorT<T> y = a;
    for (T& v : y.data) v = std::abs(v);
    return y;
}

// y[b,:] += bias ; x: [B x n], bias: [n]
template <class T>
void add_bias_rows(TensorT<T>& x, const TensorT<T>& bias) {
    int64_t n = x.shape.back();
    if (bias.size() != n)
        fail(ErrorKind::Dimension,
             "add_bias: bias " + bias.shape_str() + " vs last axis " + std::to_string(n));
    int64_t rows = x.size() / n;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < n; ++j) x.data[static_cast<size_t>(r * n + j)] += bias.data[static_cast<size_t>(j)];
}

} // namespace bnnkit
