#pragma once

#include <functional>

#include "train/loss.hpp"
#include "train/optimizer.hpp"

namespace bnnkit {

struct TrainConfig {
    int64_t epochs = 23;
    int64_t batch_size = 100;
    OptimizerConfig opt;
    BetaSchedule beta = BetaSchedule::constant(1.0);
    uint64_t seed = 42;
    int64_t n_train_override = 0; // 0: use the dataset size (shards pass the global size)
    std::string metrics_csv;      // appended per epoch when nonempty
    // distributed noise keying; single-worker runs leave these at defaults
    uint64_t rank_key = 0;
    int64_t sign_row_offset = 0;
};

struct EpochMetrics {
    int64_t epoch = 0;
    double nll = 0, kl = 0, beta = 0, total = 0;
    double train_accuracy = 0;
    double wall_seconds = 0;
};

void append_metrics_csv(const std::string& path, const EpochMetrics& m);

// argmax(mean-weight forward) == label fraction, evaluated in batches
template <class T>
double mean_weight_accuracy(const ModelGraphT<T>& g, const TensorT<T>& images,
                            const std::vector<int32_t>& labels, int64_t batch = 500);

template <class T>
class TrainerT {
public:
    TrainerT(ModelGraphT<T>& graph, const TrainConfig& cfg)
        : graph_(&graph), cfg_(cfg), opt_(cfg.opt) {}

    // gradient of the ELBO loss for one minibatch; noise keyed by the global step
    ElboBreakdown compute_grads(const TensorT<T>& x, const std::vector<int32_t>& y,
                                int64_t n_train, GraphGrads<T>& grads);
    void apply_grads(const GraphGrads<T>& grads);

    // shuffled minibatch loop over `cfg.epochs` epochs, resuming from the
    // current global step (epoch index = step / steps_per_epoch)
    std::vector<EpochMetrics> run(const TensorT<T>& images, const std::vector<int32_t>& labels);

    uint64_t global_step() const { return step_; }
    void set_global_step(uint64_t s) { step_ = s; }
    OptimizerT<T>& optimizer() { return opt_; }
    const TrainConfig& config() const { return cfg_; }

private:
    ModelGraphT<T>* graph_;
    TrainConfig cfg_;
    OptimizerT<T> opt_;
    uint64_t step_ = 0;
};

// Gradient tensors in the canonical named-parameter order of the graph.
template <class T>
std::vector<const TensorT<T>*> grads_in_param_order(ModelGraphT<T>& g, const GraphGrads<T>& grads);

// Deterministic permutation of [0,n) for one epoch.
std::vector<int64_t> epoch_permutation(uint64_t seed, uint64_t epoch, int64_t n);

using Trainer = TrainerT<float>;

} // namespace bnnkit
