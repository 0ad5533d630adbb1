#pragma once

#include "nn/forward.hpp"

namespace bnnkit {

// Per-step loss decomposition: total = nll + beta * kl / n_train.
struct ElboBreakdown {
    double nll = 0;
    double kl = 0;
    double beta = 1;
    double total = 0;
    uint64_t step = 0;
};

struct BetaSchedule {
    enum class Kind { Constant, LinearAnneal, Cyclical } kind = Kind::Constant;
    double value = 1.0;      // constant
    uint64_t ramp_steps = 1; // linear anneal
    uint64_t cycle_steps = 1;

    static BetaSchedule constant(double v) { return {Kind::Constant, v, 1, 1}; }
    static BetaSchedule linear_anneal(uint64_t ramp) { return {Kind::LinearAnneal, 0, ramp, 1}; }
    static BetaSchedule cyclical(uint64_t cycle) { return {Kind::Cyclical, 0, 1, cycle}; }
};

double beta_at(const BetaSchedule& s, uint64_t step);

// mean negative log-likelihood of integer labels under softmax(logits)
template <class T>
double nll_categorical(const TensorT<T>& logits, const std::vector<int32_t>& labels);

// gradient of nll_categorical w.r.t. logits: (softmax - onehot) / batch
template <class T>
TensorT<T> nll_categorical_grad(const TensorT<T>& logits, const std::vector<int32_t>& labels);

// One stochastic forward pass plus the closed-form KL term.
template <class T>
ElboBreakdown elbo_loss(const ModelGraphT<T>& g, const TensorT<T>& x,
                        const std::vector<int32_t>& labels, double beta, int64_t n_train,
                        const NoisePlan& plan, std::vector<LayerCache<T>>* caches,
                        TensorT<T>* logits_out = nullptr);

// Full gradient of elbo_loss w.r.t. every parameter (NLL path + KL term).
template <class T>
ElboBreakdown elbo_loss_and_grads(const ModelGraphT<T>& g, const TensorT<T>& x,
                                  const std::vector<int32_t>& labels, double beta,
                                  int64_t n_train, const NoisePlan& plan, GraphGrads<T>& grads);

} // namespace bnnkit
