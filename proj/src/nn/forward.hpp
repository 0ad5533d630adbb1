#pragma once

#include "nn/graph.hpp"

namespace bnnkit {

// Where a stochastic forward pass draws its noise. `context` folds together
// the purpose (training step, MC sample index, rank key) so that layer i can
// derive independent, replayable streams for its weight noise and sign rows.
// `sign_row_offset` shifts the per-example sign rows so a sharded batch sees
// the same signs as the full batch it was cut from.
struct NoisePlan {
    uint64_t seed = 0;
    uint64_t context = 0;
    int64_t sign_row_offset = 0;
    bool sample = true;

    static NoisePlan train_step(uint64_t seed, uint64_t step, uint64_t rank_key,
                                int64_t row_offset = 0) {
        return {seed, derive_stream({0x7261696ell /*train*/, step, rank_key}), row_offset, true};
    }
    static NoisePlan mc_sample(uint64_t seed, uint64_t sample_index) {
        return {seed, derive_stream({kStreamMc, sample_index}), 0, true};
    }
    static NoisePlan mean() { return {0, 0, 0, false}; }
};

template <class T>
struct LayerCache {
    TensorT<T> x;        // layer input
    TensorT<T> xs;       // x with input signs applied (flipout layers)
    TensorT<T> sin;      // per-example input signs  [B x in] or [B x cin]
    TensorT<T> sout;     // per-example output signs [B x out] or [B x cout]
    TensorT<T> eps;      // weight-shaped noise
    TensorT<T> delta_w;  // sigma ∘ eps
    Conv2dGeom geom{};   // conv layers
    std::vector<int64_t> argmax;  // maxpool
    std::vector<int64_t> x_shape; // flatten
};

template <class T>
struct GraphGrads {
    std::vector<TensorT<T>> dmu, drho, dbias; // aligned with graph layers

    void init(const ModelGraphT<T>& g) {
        dmu.assign(g.layers.size(), {});
        drho.assign(g.layers.size(), {});
        dbias.assign(g.layers.size(), {});
    }
};

// Runs the graph. With plan.sample, flipout noise is drawn from the plan's
// streams; otherwise the mean weights are used. Pass `caches` to retain what
// the backward pass needs (training); leave it null for inference.
template <class T>
TensorT<T> graph_forward(const ModelGraphT<T>& g, const TensorT<T>& input,
                         const NoisePlan& plan, std::vector<LayerCache<T>>* caches);

template <class T>
TensorT<T> graph_forward(const ModelGraphT<T>& g, const TensorT<T>& input,
                         const NoisePlan& plan) {
    return graph_forward(g, input, plan, static_cast<std::vector<LayerCache<T>>*>(nullptr));
}

// One flipout layer on its own. layer_index keys the noise streams, so it
// must be the layer's position in its graph.
template <class T>
TensorT<T> flipout_layer_forward(const LayerSpec& spec, const LayerParamsT<T>& params,
                                 const TensorT<T>& x, const NoisePlan& plan, size_t layer_index,
                                 LayerCache<T>* cache = nullptr);

// Exact gradients of the sampled forward function that produced `caches`.
// Returns dL/dinput; parameter gradients are accumulated into `grads`.
template <class T>
TensorT<T> graph_backward(const ModelGraphT<T>& g, const std::vector<LayerCache<T>>& caches,
                          const TensorT<T>& grad_logits, GraphGrads<T>& grads);

// Reshapes a [N,H,W,C] image batch to whatever the first layer expects.
template <class T>
TensorT<T> prepare_input(const ModelGraphT<T>& g, const TensorT<T>& images);

// Adds beta/n_train * dKL to the parameter gradients (closed form).
template <class T>
void accumulate_kl_grads(const ModelGraphT<T>& g, T scale, GraphGrads<T>& grads);

} // namespace bnnkit
