#include "nn/forward.hpp"

namespace bnnkit {

namespace {

template <class T>
TensorT<T> masked_sigma_eps(const VariationalParamT<T>& w, const TensorT<T>& eps) {
    TensorT<T> dw = w.sigma(); // mask already applied
    for (int64_t i = 0; i < dw.size(); ++i)
        dw.data[static_cast<size_t>(i)] *= eps.data[static_cast<size_t>(i)];
    return dw;
}

template <class T>
void dense_forward(const LayerSpec& spec, const LayerParamsT<T>& p, const TensorT<T>& x,
                   const NoisePlan& plan, size_t layer_index, TensorT<T>& y,
                   LayerCache<T>* cache) {
    if (x.rank() != 2 || x.shape[1] != spec.in_units)
        fail(ErrorKind::Dimension, spec.name + ": expected input [Bx" +
                                       std::to_string(spec.in_units) + "], got " + x.shape_str());
    y = matmul(x, p.w.mu);
    if (plan.sample) {
        int64_t batch = x.shape[0];
        uint64_t li = static_cast<uint64_t>(layer_index);
        SeededRng eps_rng(plan.seed, derive_stream({kStreamEps, plan.context, li}));
        TensorT<T> eps = sample_normal<T>(eps_rng, p.w.mu.shape);
        TensorT<T> dw = masked_sigma_eps(p.w, eps);
        TensorT<T> sin = sample_sign_rows<T>(plan.seed,
                                             derive_stream({kStreamSignIn, plan.context, li}),
                                             batch, spec.in_units, plan.sign_row_offset);
        TensorT<T> sout = sample_sign_rows<T>(plan.seed,
                                              derive_stream({kStreamSignOut, plan.context, li}),
                                              batch, spec.out_units, plan.sign_row_offset);
        TensorT<T> xs = mul(x, sin);
        TensorT<T> pert = matmul(xs, dw);
        for (int64_t n = 0; n < batch; ++n)
            for (int64_t j = 0; j < spec.out_units; ++j)
                y.at2(n, j) += pert.at2(n, j) * sout.at2(n, j);
        if (cache) {
            cache->xs = std::move(xs);
            cache->sin = std::move(sin);
            cache->sout = std::move(sout);
            cache->eps = std::move(eps);
            cache->delta_w = std::move(dw);
        }
    }
    if (spec.has_bias) add_bias_rows(y, p.bias);
    if (cache) cache->x = x;
}

template <class T>
void conv_forward(const LayerSpec& spec, const LayerParamsT<T>& p, const TensorT<T>& x,
                  const NoisePlan& plan, size_t layer_index, TensorT<T>& y,
                  LayerCache<T>* cache) {
    Conv2dGeom geom = conv2d_geometry(x.shape, p.w.mu.shape, spec.stride, spec.padding);
    y = conv2d(x, p.w.mu, spec.stride, spec.padding);
    if (plan.sample) {
        int64_t batch = x.shape[0];
        uint64_t li = static_cast<uint64_t>(layer_index);
        SeededRng eps_rng(plan.seed, derive_stream({kStreamEps, plan.context, li}));
        TensorT<T> eps = sample_normal<T>(eps_rng, p.w.mu.shape);
        TensorT<T> dw = masked_sigma_eps(p.w, eps);
        TensorT<T> sin = sample_sign_rows<T>(plan.seed,
                                             derive_stream({kStreamSignIn, plan.context, li}),
                                             batch, spec.cin, plan.sign_row_offset);
        TensorT<T> sout = sample_sign_rows<T>(plan.seed,
                                              derive_stream({kStreamSignOut, plan.context, li}),
                                              batch, spec.cout, plan.sign_row_offset);
        // channelwise sign flip on the input, channelwise modulation on the output
        TensorT<T> xs = x;
        for (int64_t b = 0; b < batch; ++b) {
            T* row = xs.ptr() + b * geom.in_h * geom.in_w * geom.in_c;
            const T* sb = sin.ptr() + b * geom.in_c;
            for (int64_t hw = 0; hw < geom.in_h * geom.in_w; ++hw)
                for (int64_t c = 0; c < geom.in_c; ++c) row[hw * geom.in_c + c] *= sb[c];
        }
        TensorT<T> pert = conv2d(xs, dw, spec.stride, spec.padding);
        for (int64_t b = 0; b < batch; ++b) {
            T* yrow = y.ptr() + b * geom.out_h * geom.out_w * geom.out_c;
            const T* prow = pert.ptr() + b * geom.out_h * geom.out_w * geom.out_c;
            const T* rb = sout.ptr() + b * geom.out_c;
            for (int64_t hw = 0; hw < geom.out_h * geom.out_w; ++hw)
                for (int64_t c = 0; c < geom.out_c; ++c)
                    yrow[hw * geom.out_c + c] += prow[hw * geom.out_c + c] * rb[c];
        }
        if (cache) {
            cache->xs = std::move(xs);
            cache->sin = std::move(sin);
            cache->sout = std::move(sout);
            cache->eps = std::move(eps);
            cache->delta_w = std::move(dw);
        }
    }
    if (spec.has_bias) add_bias_rows(y, p.bias);
    if (cache) {
        cache->x = x;
        cache->geom = geom;
    }
}

template <class T>
void apply_rho_chain(const VariationalParamT<T>& w, const TensorT<T>& dsigma, TensorT<T>& drho) {
    drho = TensorT<T>(w.rho.shape);
    for (int64_t i = 0; i < drho.size(); ++i) {
        size_t k = static_cast<size_t>(i);
        T m = w.has_mask() ? w.mask.data[k] : T{1};
        drho.data[k] = dsigma.data[k] * sigmoid_scalar(w.rho.data[k]) * m;
    }
}

template <class T>
TensorT<T> dense_backward(const LayerSpec& spec, const LayerParamsT<T>& p,
                          const LayerCache<T>& c, const TensorT<T>& gy, size_t li,
                          GraphGrads<T>& grads) {
    if (c.x.size() == 0) fail(ErrorKind::Usage, spec.name + ": backward without forward cache");
    int64_t batch = c.x.shape[0];
    grads.dmu[li] = matmul_tn(c.x, gy);
    if (spec.has_bias) {
        TensorT<T> db({spec.out_units});
        for (int64_t n = 0; n < batch; ++n)
            for (int64_t j = 0; j < spec.out_units; ++j) db.data[static_cast<size_t>(j)] += gy.at2(n, j);
        grads.dbias[li] = std::move(db);
    }
    TensorT<T> dx = matmul_nt(gy, p.w.mu);
    if (c.eps.size() > 0) {
        TensorT<T> gp = mul(gy, c.sout);             // through the output signs
        TensorT<T> ddw = matmul_tn(c.xs, gp);        // dL/d(delta_w)
        TensorT<T> dxs = matmul_nt(gp, c.delta_w);
        for (int64_t i = 0; i < dx.size(); ++i)
            dx.data[static_cast<size_t>(i)] += dxs.data[static_cast<size_t>(i)] * c.sin.data[static_cast<size_t>(i)];
        TensorT<T> dsigma = mul(ddw, c.eps);
        apply_rho_chain(p.w, dsigma, grads.drho[li]);
    } else {
        grads.drho[li] = TensorT<T>(p.w.rho.shape);
    }
    return dx;
}

template <class T>
TensorT<T> conv_backward(const LayerSpec& spec, const LayerParamsT<T>& p, const LayerCache<T>& c,
                         const TensorT<T>& gy, size_t li, GraphGrads<T>& grads) {
    if (c.x.size() == 0) fail(ErrorKind::Usage, spec.name + ": backward without forward cache");
    const Conv2dGeom& g = c.geom;
    if (spec.has_bias) {
        TensorT<T> db({spec.cout});
        for (int64_t b = 0; b < g.batch; ++b) {
            const T* row = gy.ptr() + b * g.out_h * g.out_w * g.out_c;
            for (int64_t hw = 0; hw < g.out_h * g.out_w; ++hw)
                for (int64_t co = 0; co < g.out_c; ++co) db.data[static_cast<size_t>(co)] += row[hw * g.out_c + co];
        }
        grads.dbias[li] = std::move(db);
    }
    grads.dmu[li] = conv2d_backward_kernel(c.x, gy, g);
    TensorT<T> dx = conv2d_backward_input(gy, p.w.mu, g);
    if (c.eps.size() > 0) {
        TensorT<T> gp = gy;
        for (int64_t b = 0; b < g.batch; ++b) {
            T* row = gp.ptr() + b * g.out_h * g.out_w * g.out_c;
            const T* rb = c.sout.ptr() + b * g.out_c;
            for (int64_t hw = 0; hw < g.out_h * g.out_w; ++hw)
                for (int64_t co = 0; co < g.out_c; ++co) row[hw * g.out_c + co] *= rb[co];
        }
        TensorT<T> ddw = conv2d_backward_kernel(c.xs, gp, g);
        TensorT<T> dxs = conv2d_backward_input(gp, c.delta_w, g);
        for (int64_t b = 0; b < g.batch; ++b) {
            T* row = dxs.ptr() + b * g.in_h * g.in_w * g.in_c;
            const T* sb = c.sin.ptr() + b * g.in_c;
            for (int64_t hw = 0; hw < g.in_h * g.in_w; ++hw)
                for (int64_t ci = 0; ci < g.in_c; ++ci) row[hw * g.in_c + ci] *= sb[ci];
        }
        for (int64_t i = 0; i < dx.size(); ++i)
            dx.data[static_cast<size_t>(i)] += dxs.data[static_cast<size_t>(i)];
        TensorT<T> dsigma = mul(ddw, c.eps);
        apply_rho_chain(p.w, dsigma, grads.drho[li]);
    } else {
        grads.drho[li] = TensorT<T>(p.w.rho.shape);
    }
    return dx;
}

} // namespace

template <class T>
TensorT<T> flipout_layer_forward(const LayerSpec& spec, const LayerParamsT<T>& params,
                                 const TensorT<T>& x, const NoisePlan& plan, size_t layer_index,
                                 LayerCache<T>* cache) {
    TensorT<T> y;
    switch (spec.kind) {
        case LayerKind::DenseFlipout:
            dense_forward(spec, params, x, plan, layer_index, y, cache);
            break;
        case LayerKind::Conv2DFlipout:
            conv_forward(spec, params, x, plan, layer_index, y, cache);
            break;
        default:
            fail(ErrorKind::Usage, spec.name + " is not a flipout layer");
    }
    return y;
}

template <class T>
TensorT<T> graph_forward(const ModelGraphT<T>& g, const TensorT<T>& input, const NoisePlan& plan,
                         std::vector<LayerCache<T>>* caches) {
    NoisePlan effective = plan;
    if (g.deterministic) effective.sample = false;
    if (caches) caches->assign(g.layers.size(), {});
    TensorT<T> cur = prepare_input(g, input);
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& spec = g.layers[i];
        LayerCache<T>* cache = caches ? &(*caches)[i] : nullptr;
        TensorT<T> next;
        switch (spec.kind) {
            case LayerKind::DenseFlipout:
                dense_forward(spec, g.params[i], cur, effective, i, next, cache);
                break;
            case LayerKind::Conv2DFlipout:
                conv_forward(spec, g.params[i], cur, effective, i, next, cache);
                break;
            case LayerKind::MaxPool2D: {
                std::vector<int64_t> argmax;
                next = maxpool2d(cur, spec.window, spec.pool_stride, cache ? &argmax : nullptr);
                if (cache) {
                    cache->argmax = std::move(argmax);
                    cache->x_shape = cur.shape;
                }
                break;
            }
            case LayerKind::Flatten: {
                if (cache) cache->x_shape = cur.shape;
                next = cur.reshaped({cur.shape[0], cur.size() / cur.shape[0]});
                break;
            }
            case LayerKind::ReLU: {
                if (cache) cache->x = cur;
                next = relu(cur);
                break;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

template <class T>
TensorT<T> graph_backward(const ModelGraphT<T>& g, const std::vector<LayerCache<T>>& caches,
                          const TensorT<T>& grad_logits, GraphGrads<T>& grads) {
    if (caches.size() != g.layers.size())
        fail(ErrorKind::Usage, "graph_backward: cache does not match graph");
    grads.init(g);
    TensorT<T> gy = grad_logits;
    for (size_t ri = g.layers.size(); ri-- > 0;) {
        const LayerSpec& spec = g.layers[ri];
        const LayerCache<T>& c = caches[ri];
        switch (spec.kind) {
            case LayerKind::DenseFlipout:
                gy = dense_backward(spec, g.params[ri], c, gy, ri, grads);
                break;
            case LayerKind::Conv2DFlipout:
                gy = conv_backward(spec, g.params[ri], c, gy, ri, grads);
                break;
            case LayerKind::MaxPool2D:
                if (c.x_shape.empty())
                    fail(ErrorKind::Usage, spec.name + ": backward without forward cache");
                gy = maxpool2d_backward(gy, c.argmax, c.x_shape);
                break;
            case LayerKind::Flatten:
                if (c.x_shape.empty())
                    fail(ErrorKind::Usage, spec.name + ": backward without forward cache");
                gy = gy.reshaped(c.x_shape);
                break;
            case LayerKind::ReLU:
                if (c.x.size() == 0)
                    fail(ErrorKind::Usage, spec.name + ": backward without forward cache");
                gy = relu_backward(gy, c.x);
                break;
        }
    }
    return gy;
}

template <class T>
TensorT<T> prepare_input(const ModelGraphT<T>& g, const TensorT<T>& images) {
    if (g.layers.empty()) fail(ErrorKind::Config, "empty graph");
    const LayerSpec& first = g.layers.front();
    int64_t batch = images.shape.empty() ? 0 : images.shape[0];
    int64_t per = batch > 0 ? images.size() / batch : 0;
    if (first.kind == LayerKind::DenseFlipout) {
        if (per != first.in_units)
            fail(ErrorKind::Dimension, "input provides " + std::to_string(per) +
                                           " features per example, first layer expects " +
                                           std::to_string(first.in_units));
        return images.reshaped({batch, per});
    }
    if (images.rank() != 4)
        fail(ErrorKind::Dimension, "convolutional graph expects [B,H,W,C] input, got " +
                                       images.shape_str());
    return images;
}

template <class T>
void accumulate_kl_grads(const ModelGraphT<T>& g, T scale, GraphGrads<T>& grads) {
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (!g.layers[i].is_variational()) continue;
        const auto& w = g.params[i].w;
        if (grads.dmu[i].size() == 0) grads.dmu[i] = TensorT<T>(w.mu.shape);
        if (grads.drho[i].size() == 0) grads.drho[i] = TensorT<T>(w.rho.shape);
        for (int64_t k = 0; k < w.mu.size(); ++k) {
            size_t s = static_cast<size_t>(k);
            T m = w.has_mask() ? w.mask.data[s] : T{1};
            if (m == T{0}) continue;
            T sigma = softplus_scalar(w.rho.data[s]);
            grads.dmu[i].data[s] += scale * w.mu.data[s];
            grads.drho[i].data[s] +=
                scale * (sigma - T{1} / sigma) * sigmoid_scalar(w.rho.data[s]);
        }
    }
}

#define BNNKIT_INSTANTIATE(T)                                                                   \
    template TensorT<T> graph_forward<T>(const ModelGraphT<T>&, const TensorT<T>&,              \
                                         const NoisePlan&, std::vector<LayerCache<T>>*);        \
    template TensorT<T> flipout_layer_forward<T>(const LayerSpec&, const LayerParamsT<T>&,      \
                                                 const TensorT<T>&, const NoisePlan&, size_t,   \
                                                 LayerCache<T>*);                               \
    template TensorT<T> graph_backward<T>(const ModelGraphT<T>&,                                \
                                          const std::vector<LayerCache<T>>&, const TensorT<T>&, \
                                          GraphGrads<T>&);                                      \
    template TensorT<T> prepare_input<T>(const ModelGraphT<T>&, const TensorT<T>&);             \
    template void accumulate_kl_grads<T>(const ModelGraphT<T>&, T, GraphGrads<T>&);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
