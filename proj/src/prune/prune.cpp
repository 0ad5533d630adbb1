#include "prune/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bnnkit {

template <class T>
TensorT<T> snr(const VariationalParamT<T>& p) {
    if (!p.mu.same_shape(p.rho)) fail(ErrorKind::Dimension, "snr: mu and rho shapes differ");
    TensorT<T> out(p.mu.shape);
    for (int64_t i = 0; i < out.size(); ++i) {
        size_t k = static_cast<size_t>(i);
        T sigma = softplus_scalar(p.rho.data[k]); // > 0 even for pruned weights
        out.data[k] = std::abs(p.mu.data[k]) / sigma;
    }
    return out;
}

template <class T>
GlobalSnrT<T> global_snr(const ModelGraphT<T>& g) {
    GlobalSnrT<T> out;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (!g.layers[i].is_variational()) continue;
        out.layer_names.push_back(g.layers[i].name);
        out.per_layer.push_back(snr(g.params[i].w));
        const auto& t = out.per_layer.back();
        out.flat.insert(out.flat.end(), t.data.begin(), t.data.end());
    }
    return out;
}

namespace {

// Installs keep-masks and zeroes pruned means. keep[i] spans the i-th
// variational layer's weights in flat order.
template <class T>
PruneMaskT<T> apply_keep(ModelGraphT<T>& g, const std::vector<std::vector<char>>& keep,
                         double threshold) {
    PruneMaskT<T> mask;
    mask.threshold = threshold;
    size_t vi = 0;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (!g.layers[i].is_variational()) continue;
        auto& w = g.params[i].w;
        const auto& k = keep[vi++];
        int64_t nnz = 0;
        TensorT<T> m(w.mu.shape);
        for (int64_t j = 0; j < w.mu.size(); ++j) {
            size_t s = static_cast<size_t>(j);
            if (k[s]) {
                m.data[s] = T{1};
                ++nnz;
            } else {
                w.mu.data[s] = T{0};
            }
        }
        bool all_kept = nnz == w.mu.size();
        if (!all_kept || w.has_mask()) w.mask = std::move(m);
        mask.layer_names.push_back(g.layers[i].name);
        mask.layer_masks.push_back(w.has_mask() ? w.mask : TensorT<T>::full(w.mu.shape, T{1}));
        mask.per_layer_nonzeros.push_back(nnz);
        mask.global_nonzeros += nnz;
    }
    return mask;
}

} // namespace

template <class T>
std::pair<ModelGraphT<T>, PruneMaskT<T>> prune_by_threshold(const ModelGraphT<T>& g, double t) {
    if (t < 0) fail(ErrorKind::Parameter, "prune: threshold must be >= 0");
    ModelGraphT<T> pruned = g;
    std::vector<std::vector<char>> keep;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (!g.layers[i].is_variational()) continue;
        TensorT<T> r = snr(g.params[i].w);
        std::vector<char> k(static_cast<size_t>(r.size()));
        for (int64_t j = 0; j < r.size(); ++j) {
            size_t s = static_cast<size_t>(j);
            bool was_pruned = g.params[i].w.has_mask() && g.params[i].w.mask.data[s] == T{0};
            k[s] = !was_pruned && static_cast<double>(r.data[s]) >= t;
        }
        keep.push_back(std::move(k));
    }
    PruneMaskT<T> mask = apply_keep(pruned, keep, t);
    return {std::move(pruned), std::move(mask)};
}

template <class T>
std::pair<ModelGraphT<T>, PruneMaskT<T>> prune_by_fraction(const ModelGraphT<T>& g, double pct) {
    if (pct < 0 || pct > 100)
        fail(ErrorKind::Parameter, "prune: percentage must lie in [0,100], got " +
                                       std::to_string(pct));
    GlobalSnrT<T> gs = global_snr(g);
    int64_t n = static_cast<int64_t>(gs.flat.size());
    int64_t to_prune = static_cast<int64_t>(std::llround(pct / 100.0 * static_cast<double>(n)));

    // ascending SNR; among ties the higher global index is pruned first, so
    // the lower-index weight survives
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        T ra = gs.flat[static_cast<size_t>(a)], rb = gs.flat[static_cast<size_t>(b)];
        if (ra != rb) return ra < rb;
        return a > b;
    });

    std::vector<char> keep_flat(static_cast<size_t>(n), 1);
    for (int64_t i = 0; i < to_prune; ++i) keep_flat[static_cast<size_t>(order[static_cast<size_t>(i)])] = 0;

    double threshold;
    if (to_prune == 0) threshold = 0.0;
    else if (to_prune == n) threshold = std::numeric_limits<double>::infinity();
    else {
        double last_pruned = gs.flat[static_cast<size_t>(order[static_cast<size_t>(to_prune - 1)])];
        double first_kept = gs.flat[static_cast<size_t>(order[static_cast<size_t>(to_prune)])];
        threshold = (last_pruned + first_kept) / 2.0;
    }

    ModelGraphT<T> pruned = g;
    std::vector<std::vector<char>> keep;
    int64_t at = 0;
    for (const auto& layer : gs.per_layer) {
        keep.emplace_back(keep_flat.begin() + at, keep_flat.begin() + at + layer.size());
        at += layer.size();
    }
    PruneMaskT<T> mask = apply_keep(pruned, keep, threshold);
    return {std::move(pruned), std::move(mask)};
}

#define BNNKIT_INSTANTIATE(T)                                                              \
    template TensorT<T> snr<T>(const VariationalParamT<T>&);                               \
    template GlobalSnrT<T> global_snr<T>(const ModelGraphT<T>&);                           \
    template std::pair<ModelGraphT<T>, PruneMaskT<T>> prune_by_threshold<T>(               \
        const ModelGraphT<T>&, double);                                                    \
    template std::pair<ModelGraphT<T>, PruneMaskT<T>> prune_by_fraction<T>(                \
        const ModelGraphT<T>&, double);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
