#include "prune/sparse.hpp"

namespace bnnkit {

template <class T>
SparseKernelT<T> to_csr(const VariationalParamT<T>& w) {
    if (w.mu.rank() != 2) fail(ErrorKind::Usage, "to_csr: dense kernels only");
    SparseKernelT<T> k;
    k.rows = w.mu.shape[0];
    k.cols = w.mu.shape[1];
    k.row_offsets.reserve(static_cast<size_t>(k.rows) + 1);
    TensorT<T> sig = softplus(w.rho);
    for (int64_t i = 0; i < k.rows; ++i) {
        k.row_offsets.push_back(k.nnz());
        for (int64_t j = 0; j < k.cols; ++j) {
            size_t s = static_cast<size_t>(i * k.cols + j);
            if (w.has_mask() && w.mask.data[s] == T{0}) continue;
            k.col_indices.push_back(static_cast<int32_t>(j));
            k.mu_values.push_back(w.mu.data[s]);
            k.sigma_values.push_back(sig.data[s]);
            k.flat_indices.push_back(static_cast<int64_t>(s));
        }
    }
    k.row_offsets.push_back(k.nnz());
    return k;
}

template <class T>
SparseModelT<T> convert_to_sparse(const ModelGraphT<T>& g) {
    bool any_mask = false;
    for (size_t i = 0; i < g.layers.size(); ++i)
        if (g.layers[i].is_variational() && g.params[i].w.has_mask()) any_mask = true;
    if (!any_mask)
        fail(ErrorKind::Usage, "convert_to_sparse: graph has not been pruned");
    SparseModelT<T> m;
    m.graph = &g;
    m.dense_kernels.resize(g.layers.size());
    m.is_sparse.assign(g.layers.size(), 0);
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (g.layers[i].kind != LayerKind::DenseFlipout) continue;
        m.dense_kernels[i] = to_csr(g.params[i].w);
        m.is_sparse[i] = 1;
    }
    return m;
}

template <class T>
void csr_matmul_add(const SparseKernelT<T>& k, const std::vector<T>& values, const TensorT<T>& x,
                    TensorT<T>& y) {
    if (x.rank() != 2 || x.shape[1] != k.rows)
        fail(ErrorKind::Dimension, "csr_matmul: input " + x.shape_str() + " vs " +
                                       std::to_string(k.rows) + " kernel rows");
    if (y.shape[0] != x.shape[0] || y.shape[1] != k.cols)
        fail(ErrorKind::Dimension, "csr_matmul: bad output shape " + y.shape_str());
    const int64_t batch = x.shape[0];
    const int64_t tile = 512; // keeps the transposed tiles cache resident
    std::vector<T> xt(static_cast<size_t>(k.rows * std::min(tile, batch)));
    std::vector<T> yt(static_cast<size_t>(k.cols * std::min(tile, batch)));
    for (int64_t at = 0; at < batch; at += tile) {
        int64_t tb = std::min(tile, batch - at);
        // transpose the input tile to feature-major
        for (int64_t n = 0; n < tb; ++n) {
            const T* row = x.ptr() + (at + n) * k.rows;
            for (int64_t i = 0; i < k.rows; ++i) xt[static_cast<size_t>(i * tb + n)] = row[i];
        }
        std::fill(yt.begin(), yt.begin() + static_cast<size_t>(k.cols * tb), T{0});
        for (int64_t i = 0; i < k.rows; ++i) {
            const T* xrow = xt.data() + i * tb;
            for (int64_t e = k.row_offsets[static_cast<size_t>(i)];
                 e < k.row_offsets[static_cast<size_t>(i) + 1]; ++e) {
                T v = values[static_cast<size_t>(e)];
                T* yrow = yt.data() + k.col_indices[static_cast<size_t>(e)] * tb;
                for (int64_t n = 0; n < tb; ++n) yrow[n] += v * xrow[n];
            }
        }
        for (int64_t n = 0; n < tb; ++n) {
            T* row = y.ptr() + (at + n) * k.cols;
            for (int64_t j = 0; j < k.cols; ++j) row[j] += yt[static_cast<size_t>(j * tb + n)];
        }
    }
}

namespace {

// CSR twin of the dense flipout layer: same noise streams, same math, only
// the kept weights participate.
template <class T>
TensorT<T> sparse_dense_forward(const SparseModelT<T>& m, size_t layer_index, const TensorT<T>& x,
                                const NoisePlan& plan) {
    const LayerSpec& spec = m.graph->layers[layer_index];
    const SparseKernelT<T>& k = m.dense_kernels[layer_index];
    if (x.rank() != 2 || x.shape[1] != spec.in_units)
        fail(ErrorKind::Dimension, spec.name + ": expected [Bx" + std::to_string(spec.in_units) +
                                       "], got " + x.shape_str());
    int64_t batch = x.shape[0];
    TensorT<T> y({batch, spec.out_units});
    csr_matmul_add(k, k.mu_values, x, y);
    if (plan.sample) {
        uint64_t li = static_cast<uint64_t>(layer_index);
        uint64_t eps_stream = derive_stream({kStreamEps, plan.context, li});
        std::vector<T> noise_values(static_cast<size_t>(k.nnz()));
        for (int64_t e = 0; e < k.nnz(); ++e)
            noise_values[static_cast<size_t>(e)] =
                k.sigma_values[static_cast<size_t>(e)] *
                static_cast<T>(normal_at(plan.seed, eps_stream,
                                         static_cast<uint64_t>(k.flat_indices[static_cast<size_t>(e)])));
        TensorT<T> sin = sample_sign_rows<T>(plan.seed,
                                             derive_stream({kStreamSignIn, plan.context, li}),
                                             batch, spec.in_units, plan.sign_row_offset);
        TensorT<T> sout = sample_sign_rows<T>(plan.seed,
                                              derive_stream({kStreamSignOut, plan.context, li}),
                                              batch, spec.out_units, plan.sign_row_offset);
        TensorT<T> xs = mul(x, sin);
        TensorT<T> pert({batch, spec.out_units});
        csr_matmul_add(k, noise_values, xs, pert);
        for (int64_t n = 0; n < batch; ++n)
            for (int64_t j = 0; j < spec.out_units; ++j)
                y.at2(n, j) += pert.at2(n, j) * sout.at2(n, j);
    }
    if (spec.has_bias) add_bias_rows(y, m.graph->params[layer_index].bias);
    return y;
}

template <class T>
TensorT<T> sparse_forward(const SparseModelT<T>& m, const TensorT<T>& input,
                          const NoisePlan& original_plan) {
    const ModelGraphT<T>& g = *m.graph;
    NoisePlan plan = original_plan;
    if (g.deterministic) plan.sample = false;
    TensorT<T> cur = prepare_input(g, input);
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (m.is_sparse[i]) {
            cur = sparse_dense_forward(m, i, cur, plan);
            continue;
        }
        // conv layers stay on the masked dense path, with their true index
        const LayerSpec& spec = g.layers[i];
        switch (spec.kind) {
            case LayerKind::MaxPool2D:
                cur = maxpool2d(cur, spec.window, spec.pool_stride);
                break;
            case LayerKind::Flatten:
                cur = cur.reshaped({cur.shape[0], cur.size() / cur.shape[0]});
                break;
            case LayerKind::ReLU:
                cur = relu(cur);
                break;
            default:
                cur = flipout_layer_forward(spec, g.params[i], cur, plan, i);
        }
    }
    return softmax(cur);
}

} // namespace

template <class T>
PredictiveSamplesT<T> sparse_predict_mc(const SparseModelT<T>& m, const TensorT<T>& x, int64_t s,
                                        uint64_t seed, std::vector<int32_t> labels) {
    if (!m.graph) fail(ErrorKind::Usage, "sparse_predict_mc: unconverted model");
    if (s < 1) fail(ErrorKind::Parameter, "sparse_predict_mc: S must be >= 1");
    PredictiveSamplesT<T> ps;
    ps.labels = std::move(labels);
    for (int64_t i = 0; i < s; ++i) {
        NoisePlan plan = NoisePlan::mc_sample(seed, static_cast<uint64_t>(i));
        TensorT<T> probs = sparse_forward(m, x, plan);
        if (i == 0) ps.samples = TensorT<T>({s, probs.shape[0], probs.shape[1]});
        std::copy(probs.data.begin(), probs.data.end(), ps.samples.ptr() + i * probs.size());
    }
    return ps;
}

#define BNNKIT_INSTANTIATE(T)                                                              \
    template SparseKernelT<T> to_csr<T>(const VariationalParamT<T>&);                      \
    template SparseModelT<T> convert_to_sparse<T>(const ModelGraphT<T>&);                  \
    template PredictiveSamplesT<T> sparse_predict_mc<T>(const SparseModelT<T>&,            \
                                                        const TensorT<T>&, int64_t,        \
                                                        uint64_t, std::vector<int32_t>);   \
    template void csr_matmul_add<T>(const SparseKernelT<T>&, const std::vector<T>&,        \
                                    const TensorT<T>&, TensorT<T>&);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
