#pragma once

#include "nn/graph.hpp"

namespace bnnkit {

// Boolean keep-masks produced by a pruning pass, one per variational layer.
template <class T>
struct PruneMaskT {
    std::vector<std::string> layer_names;
    std::vector<TensorT<T>> layer_masks; // 1 = kept, 0 = pruned
    double threshold = 0;
    std::vector<int64_t> per_layer_nonzeros;
    int64_t global_nonzeros = 0;
};

using PruneMask = PruneMaskT<float>;

// elementwise |mu| / softplus(rho); pruned weights report 0 (their mu is 0)
template <class T>
TensorT<T> snr(const VariationalParamT<T>& p);

template <class T>
struct GlobalSnrT {
    std::vector<std::string> layer_names;
    std::vector<TensorT<T>> per_layer;
    std::vector<T> flat; // concatenated in layer order
};

template <class T>
GlobalSnrT<T> global_snr(const ModelGraphT<T>& g);

// Zeroes mu and removes weights with SNR < threshold from sampling. Biases
// are untouched. Pure: returns a pruned copy.
template <class T>
std::pair<ModelGraphT<T>, PruneMaskT<T>> prune_by_threshold(const ModelGraphT<T>& g, double t);

// Prunes the pct% lowest-SNR weights network-wide; among equal SNR values the
// lower-index weight is kept. Returns the implied threshold in the mask.
template <class T>
std::pair<ModelGraphT<T>, PruneMaskT<T>> prune_by_fraction(const ModelGraphT<T>& g, double pct);

} // namespace bnnkit
