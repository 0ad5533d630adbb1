#include "train/loss.hpp"

namespace bnnkit {

double beta_at(const BetaSchedule& s, uint64_t step) {
    switch (s.kind) {
        case BetaSchedule::Kind::Constant:
            return s.value;
        case BetaSchedule::Kind::LinearAnneal: {
            if (s.ramp_steps == 0) return 1.0;
            double b = static_cast<double>(step) / static_cast<double>(s.ramp_steps);
            return b < 1.0 ? b : 1.0;
        }
        case BetaSchedule::Kind::Cyclical: {
            if (s.cycle_steps == 0) return 1.0;
            double frac = static_cast<double>(step % s.cycle_steps) /
                          static_cast<double>(s.cycle_steps);
            double b = 2.0 * frac;
            return b < 1.0 ? b : 1.0;
        }
    }
    return 1.0;
}

namespace {

template <class T>
void check_labels(const TensorT<T>& logits, const std::vector<int32_t>& labels) {
    if (logits.rank() != 2)
        fail(ErrorKind::Dimension, "nll: logits must be [BxC], got " + logits.shape_str());
    if (static_cast<int64_t>(labels.size()) != logits.shape[0])
        fail(ErrorKind::Data, "nll: " + std::to_string(labels.size()) + " labels for batch of " +
                                  std::to_string(logits.shape[0]));
    int64_t c = logits.shape[1];
    for (int32_t l : labels)
        if (l < 0 || l >= c)
            fail(ErrorKind::Data,
                 "nll: label " + std::to_string(l) + " outside [0," + std::to_string(c) + ")");
}

} // namespace

template <class T>
double nll_categorical(const TensorT<T>& logits, const std::vector<int32_t>& labels) {
    check_labels(logits, labels);
    int64_t batch = logits.shape[0], c = logits.shape[1];
    long double acc = 0;
    for (int64_t n = 0; n < batch; ++n) {
        const T* row = logits.ptr() + n * c;
        T mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        long double sum = 0;
        for (int64_t j = 0; j < c; ++j) sum += std::exp(static_cast<long double>(row[j]) - mx);
        long double lse = mx + std::log(sum);
        acc += lse - row[labels[static_cast<size_t>(n)]];
    }
    return static_cast<double>(acc / batch);
}

template <class T>
TensorT<T> nll_categorical_grad(const TensorT<T>& logits, const std::vector<int32_t>& labels) {
    check_labels(logits, labels);
    int64_t batch = logits.shape[0], c = logits.shape[1];
    TensorT<T> g = softmax(logits);
    for (int64_t n = 0; n < batch; ++n) {
        g.at2(n, labels[static_cast<size_t>(n)]) -= T{1};
        for (int64_t j = 0; j < c; ++j) g.at2(n, j) /= static_cast<T>(batch);
    }
    return g;
}

template <class T>
ElboBreakdown elbo_loss(const ModelGraphT<T>& g, const TensorT<T>& x,
                        const std::vector<int32_t>& labels, double beta, int64_t n_train,
                        const NoisePlan& plan, std::vector<LayerCache<T>>* caches,
                        TensorT<T>* logits_out) {
    if (n_train <= 0) fail(ErrorKind::Parameter, "elbo_loss: n_train must be positive");
    TensorT<T> logits = graph_forward(g, x, plan, caches);
    ElboBreakdown b;
    b.nll = nll_categorical(logits, labels);
    b.kl = static_cast<double>(g.kl());
    b.beta = beta;
    b.total = b.nll + beta * b.kl / static_cast<double>(n_train);
    if (logits_out) *logits_out = std::move(logits);
    return b;
}

template <class T>
ElboBreakdown elbo_loss_and_grads(const ModelGraphT<T>& g, const TensorT<T>& x,
                                  const std::vector<int32_t>& labels, double beta,
                                  int64_t n_train, const NoisePlan& plan, GraphGrads<T>& grads) {
    std::vector<LayerCache<T>> caches;
    TensorT<T> logits;
    ElboBreakdown b = elbo_loss(g, x, labels, beta, n_train, plan, &caches, &logits);
    TensorT<T> dlogits = nll_categorical_grad(logits, labels);
    graph_backward(g, caches, dlogits, grads);
    accumulate_kl_grads(g, static_cast<T>(beta / static_cast<double>(n_train)), grads);
    return b;
}

#define BNNKIT_INSTANTIATE(T)                                                                 \
    template double nll_categorical<T>(const TensorT<T>&, const std::vector<int32_t>&);       \
    template TensorT<T> nll_categorical_grad<T>(const TensorT<T>&,                            \
                                                const std::vector<int32_t>&);                 \
    template ElboBreakdown elbo_loss<T>(const ModelGraphT<T>&, const TensorT<T>&,             \
                                        const std::vector<int32_t>&, double, int64_t,         \
                                        const NoisePlan&, std::vector<LayerCache<T>>*,        \
                                        TensorT<T>*);                                         \
    template ElboBreakdown elbo_loss_and_grads<T>(const ModelGraphT<T>&, const TensorT<T>&,   \
                                                  const std::vector<int32_t>&, double,        \
                                                  int64_t, const NoisePlan&, GraphGrads<T>&);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
