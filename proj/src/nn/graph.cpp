#include "nn/graph.hpp"

#include <cmath>
#include <set>

namespace bnnkit {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::DenseFlipout: return "DenseFlipout";
        case LayerKind::Conv2DFlipout: return "Conv2DFlipout";
        case LayerKind::MaxPool2D: return "MaxPool2D";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::ReLU: return "ReLU";
    }
    return "?";
}

LayerSpec LayerSpec::dense(std::string name, int64_t in, int64_t out, bool bias) {
    LayerSpec s;
    s.kind = LayerKind::DenseFlipout;
    s.name = std::move(name);
    s.in_units = in;
    s.out_units = out;
    s.has_bias = bias;
    return s;
}

LayerSpec LayerSpec::conv(std::string name, int64_t kh, int64_t kw, int64_t cin, int64_t cout,
                          int64_t stride, Padding padding, bool bias) {
    LayerSpec s;
    s.kind = LayerKind::Conv2DFlipout;
    s.name = std::move(name);
    s.kh = kh; s.kw = kw; s.cin = cin; s.cout = cout;
    s.stride = stride;
    s.padding = padding;
    s.has_bias = bias;
    return s;
}

LayerSpec LayerSpec::maxpool(std::string name, int64_t window, int64_t stride) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2D;
    s.name = std::move(name);
    s.window = window;
    s.pool_stride = stride;
    s.has_bias = false;
    return s;
}

LayerSpec LayerSpec::flatten(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    s.name = std::move(name);
    s.has_bias = false;
    return s;
}

LayerSpec LayerSpec::relu(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    s.name = std::move(name);
    s.has_bias = false;
    return s;
}

std::vector<int64_t> LayerSpec::weight_shape() const {
    switch (kind) {
        case LayerKind::DenseFlipout: return {in_units, out_units};
        case LayerKind::Conv2DFlipout: return {kh, kw, cin, cout};
        default: return {};
    }
}

int64_t LayerSpec::bias_count() const {
    if (!has_bias) return 0;
    switch (kind) {
        case LayerKind::DenseFlipout: return out_units;
        case LayerKind::Conv2DFlipout: return cout;
        default: return 0;
    }
}

int64_t LayerSpec::param_count() const {
    if (!is_variational()) return 0;
    int64_t w = 1;
    for (int64_t d : weight_shape()) w *= d;
    return 2 * w + bias_count();
}

template <class T>
ModelGraphT<T> ModelGraphT<T>::make(std::vector<LayerSpec> specs) {
    std::set<std::string> names;
    for (const auto& s : specs)
        if (!names.insert(s.name).second)
            fail(ErrorKind::Config, "duplicate layer name '" + s.name + "'");
    ModelGraphT<T> g;
    g.layers = std::move(specs);
    g.params.resize(g.layers.size());
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& s = g.layers[i];
        if (!s.is_variational()) continue;
        auto ws = s.weight_shape();
        g.params[i].w.mu = TensorT<T>(ws);
        g.params[i].w.rho = TensorT<T>(ws);
        if (s.has_bias) g.params[i].bias = TensorT<T>({s.bias_count()});
    }
    return g;
}

template <class T>
int64_t ModelGraphT<T>::param_count() const {
    int64_t n = 0;
    for (const auto& s : layers) n += s.param_count();
    return n;
}

template <class T>
T kl_to_standard_normal(const VariationalParamT<T>& p) {
    if (!p.mu.same_shape(p.rho))
        fail(ErrorKind::Dimension, "kl: mu and rho shapes differ");
    long double acc = 0;
    for (int64_t i = 0; i < p.mu.size(); ++i) {
        size_t k = static_cast<size_t>(i);
        if (p.has_mask() && p.mask.data[k] == T{0}) continue;
        long double sigma = softplus_scalar(static_cast<double>(p.rho.data[k]));
        long double mu = p.mu.data[k];
        acc += -std::log(sigma) + (sigma * sigma + mu * mu - 1.0L) / 2.0L;
    }
    return static_cast<T>(acc);
}

template <class T>
T ModelGraphT<T>::kl() const {
    long double acc = 0;
    for (size_t i = 0; i < layers.size(); ++i)
        if (layers[i].is_variational()) acc += kl_to_standard_normal(params[i].w);
    return static_cast<T>(acc);
}

template <class T>
std::vector<NamedParam<T>> ModelGraphT<T>::named_params() {
    std::vector<NamedParam<T>> out;
    for (size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& s = layers[i];
        if (!s.is_variational()) continue;
        out.push_back({s.name + "/kernel", &params[i].w.mu, NamedParam<T>::Kind::Mu, true});
        out.push_back({s.name + "/un-transformed scale", &params[i].w.rho,
                       NamedParam<T>::Kind::Rho, !deterministic});
        if (s.has_bias)
            out.push_back({s.name + "/bias", &params[i].bias, NamedParam<T>::Kind::Bias, true});
    }
    return out;
}

template <class T>
void ModelGraphT<T>::init_params(uint64_t seed, double mu_std, double rho_mean, double rho_std) {
    if (mu_std <= 0 || rho_std < 0)
        fail(ErrorKind::Parameter, "init_params: standard deviations must be positive");
    for (size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].is_variational()) continue;
        auto& w = params[i].w;
        SeededRng rng(seed, derive_stream({kStreamInit, static_cast<uint64_t>(i)}));
        for (T& v : w.mu.data) v = static_cast<T>(rng.normal() * mu_std);
        for (T& v : w.rho.data) v = static_cast<T>(rho_mean + rng.normal() * rho_std);
        w.mask = TensorT<T>();
        if (layers[i].has_bias)
            std::fill(params[i].bias.data.begin(), params[i].bias.data.end(), T{0});
    }
}

std::vector<LayerSpec> preset_layers(const std::string& preset) {
    if (preset == "bnn-fc") {
        return {
            LayerSpec::dense("den_1", 784, 256), LayerSpec::relu("relu_1"),
            LayerSpec::dense("den_2", 256, 256), LayerSpec::relu("relu_2"),
            LayerSpec::dense("den_3", 256, 10),
        };
    }
    if (preset == "bnn-conv" || preset == "bnn-conv-64") {
        int64_t f = preset == "bnn-conv" ? 256 : 64;
        return {
            LayerSpec::conv("conv_1", 5, 5, 1, f, 2, Padding::Valid), // 28 -> 12
            LayerSpec::relu("relu_1"),
            LayerSpec::maxpool("max_1", 2, 2),                        // 12 -> 6
            LayerSpec::conv("conv_2", 5, 5, f, f, 1, Padding::Valid), // 6 -> 2
            LayerSpec::relu("relu_2"),
            LayerSpec::flatten("flatten"),
            LayerSpec::dense("den_1", 4 * f, 10),
        };
    }
    fail(ErrorKind::Config, "unknown model preset '" + preset + "'");
}

std::vector<std::string> preset_names() { return {"bnn-fc", "bnn-conv", "bnn-conv-64"}; }

template struct ModelGraphT<float>;
template struct ModelGraphT<double>;
template float kl_to_standard_normal<float>(const VariationalParamT<float>&);
template double kl_to_standard_normal<double>(const VariationalParamT<double>&);

} // namespace bnnkit
