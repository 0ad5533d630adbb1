#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace bnnkit {

enum class LayerKind { DenseFlipout, Conv2DFlipout, MaxPool2D, Flatten, ReLU };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind;
    std::string name;
    // DenseFlipout
    int64_t in_units = 0, out_units = 0;
    // Conv2DFlipout
    int64_t kh = 0, kw = 0, cin = 0, cout = 0;
    int64_t stride = 1;
    Padding padding = Padding::Valid;
    // MaxPool2D
    int64_t window = 0, pool_stride = 0;
    bool has_bias = true;

    static LayerSpec dense(std::string name, int64_t in, int64_t out, bool bias = true);
    static LayerSpec conv(std::string name, int64_t kh, int64_t kw, int64_t cin, int64_t cout,
                          int64_t stride = 1, Padding padding = Padding::Valid, bool bias = true);
    static LayerSpec maxpool(std::string name, int64_t window, int64_t stride);
    static LayerSpec flatten(std::string name);
    static LayerSpec relu(std::string name);

    bool is_variational() const {
        return kind == LayerKind::DenseFlipout || kind == LayerKind::Conv2DFlipout;
    }
    // 2*w + bias for flipout layers (kernel mean + untransformed scale + point bias)
    int64_t param_count() const;
    std::vector<int64_t> weight_shape() const;
    int64_t bias_count() const;
};

// Gaussian posterior over one layer's kernel: mean mu and untransformed scale
// rho with sigma = softplus(rho). An optional 0/1 mask marks pruned weights;
// masked positions have mu forced to zero and are excluded from sampling and
// from the KL.
template <class T>
struct VariationalParamT {
    TensorT<T> mu;
    TensorT<T> rho;
    TensorT<T> mask; // empty when nothing is pruned

    bool has_mask() const { return mask.size() > 0; }

    TensorT<T> sigma() const {
        TensorT<T> s = softplus(rho);
        if (has_mask())
            for (int64_t i = 0; i < s.size(); ++i)
                s.data[static_cast<size_t>(i)] *= mask.data[static_cast<size_t>(i)];
        return s;
    }

    int64_t kept_count() const {
        if (!has_mask()) return mu.size();
        int64_t n = 0;
        for (T v : mask.data) n += (v != T{0});
        return n;
    }
};

template <class T>
struct LayerParamsT {
    VariationalParamT<T> w; // empty tensors for non-variational layers
    TensorT<T> bias;        // empty when has_bias is false
};

// Named handle onto one trainable tensor; order is the graph's canonical
// parameter order (layer by layer: kernel, un-transformed scale, bias).
template <class T>
struct NamedParam {
    std::string name;
    TensorT<T>* tensor;
    enum class Kind { Mu, Rho, Bias } kind;
    bool trainable; // rho is frozen in deterministic mode
};

template <class T>
struct ModelGraphT {
    std::vector<LayerSpec> layers;
    std::vector<LayerParamsT<T>> params;
    // sigma-frozen mode: forward uses mean weights only and rho is untrained
    bool deterministic = false;

    static ModelGraphT make(std::vector<LayerSpec> specs);

    int64_t param_count() const;
    T kl() const;
    std::vector<NamedParam<T>> named_params();

    // rho ~ N(rho_mean, rho_std^2), mu ~ N(0, mu_std^2), biases zero
    void init_params(uint64_t seed, double mu_std = 0.1, double rho_mean = -9.0,
                     double rho_std = 0.1);
};

// closed-form KL(N(mu, sigma^2) || N(0,1)) summed over kept weights
template <class T>
T kl_to_standard_normal(const VariationalParamT<T>& p);

using ModelGraph = ModelGraphT<float>;

// Reference architectures for the pruning study. "bnn-conv-64" is the
// channel-reduced variant of bnn-conv (64 filters instead of 256).
std::vector<LayerSpec> preset_layers(const std::string& preset);
std::vector<std::string> preset_names();

} // namespace bnnkit
