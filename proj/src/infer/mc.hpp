#pragma once

#include "nn/forward.hpp"

namespace bnnkit {

// S stochastic softmax passes over a batch; samples[s][b][c]. Sample s always
// draws from noise stream (seed, s), so a smaller S is a strict prefix of a
// larger one.
template <class T>
struct PredictiveSamplesT {
    TensorT<T> samples; // [S x B x C]
    std::vector<int32_t> labels; // optional ground truth, empty if unknown

    int64_t mc_count() const { return samples.shape.empty() ? 0 : samples.shape[0]; }
    int64_t batch() const { return samples.rank() == 3 ? samples.shape[1] : 0; }
    int64_t classes() const { return samples.rank() == 3 ? samples.shape[2] : 0; }
};

using PredictiveSamples = PredictiveSamplesT<float>;

template <class T>
PredictiveSamplesT<T> predict_mc(const ModelGraphT<T>& g, const TensorT<T>& x, int64_t s,
                                 uint64_t seed, std::vector<int32_t> labels = {});

template <class T>
TensorT<T> predictive_mean(const PredictiveSamplesT<T>& ps);

template <class T>
double accuracy(const PredictiveSamplesT<T>& ps);

struct Histogram {
    std::vector<double> edges;  // bins+1 edges covering [0,1]
    std::vector<int64_t> counts;
    int64_t matching_examples = 0;
};

// Distribution of class_index's softmax value across MC samples, restricted to
// examples whose true label equals true_class_filter.
template <class T>
Histogram class_pdf_histogram(const PredictiveSamplesT<T>& ps, int64_t class_index,
                              int32_t true_class_filter, int64_t bins);

// Two-sample Kolmogorov-Smirnov distance per (example, class), plus the max.
struct KsSummary {
    TensorT<double> per_pair; // [B x C]
    double max = 0;
};

template <class T>
KsSummary mc_convergence(const PredictiveSamplesT<T>& small, const PredictiveSamplesT<T>& large);

// CSV with one row per (example, class): example_id, class, mean, std
template <class T>
void write_predictive_csv(const PredictiveSamplesT<T>& ps, const std::string& path);

} // namespace bnnkit
