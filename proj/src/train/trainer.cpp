#include "train/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

namespace bnnkit {

void append_metrics_csv(const std::string& path, const EpochMetrics& m) {
    bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) fail(ErrorKind::NotFound, "cannot open metrics csv '" + path + "'");
    if (fresh) out << "epoch,nll,kl,beta,total,train_accuracy,wall_seconds\n";
    out << m.epoch << "," << m.nll << "," << m.kl << "," << m.beta << "," << m.total << ","
        << m.train_accuracy << "," << m.wall_seconds << "\n";
}

std::vector<int64_t> epoch_permutation(uint64_t seed, uint64_t epoch, int64_t n) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    SeededRng rng(seed, derive_stream({kStreamShuffle, epoch}));
    for (int64_t i = n - 1; i > 0; --i) {
        int64_t j = static_cast<int64_t>(rng.next_u32() % static_cast<uint32_t>(i + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

template <class T>
double mean_weight_accuracy(const ModelGraphT<T>& g, const TensorT<T>& images,
                            const std::vector<int32_t>& labels, int64_t batch) {
    int64_t n = images.shape[0];
    if (n == 0) return 0;
    int64_t per = images.size() / n;
    int64_t correct = 0;
    for (int64_t at = 0; at < n; at += batch) {
        int64_t b = std::min(batch, n - at);
        TensorT<T> x({b, images.shape[1], images.shape[2], images.shape[3]});
        std::copy(images.ptr() + at * per, images.ptr() + (at + b) * per, x.ptr());
        TensorT<T> logits = graph_forward(g, x, NoisePlan::mean());
        int64_t c = logits.shape[1];
        for (int64_t i = 0; i < b; ++i) {
            const T* row = logits.ptr() + i * c;
            int64_t best = 0;
            for (int64_t j = 1; j < c; ++j)
                if (row[j] > row[best]) best = j;
            correct += (best == labels[static_cast<size_t>(at + i)]);
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

template <class T>
ElboBreakdown TrainerT<T>::compute_grads(const TensorT<T>& x, const std::vector<int32_t>& y,
                                         int64_t n_train, GraphGrads<T>& grads) {
    double beta = beta_at(cfg_.beta, step_);
    NoisePlan plan =
        NoisePlan::train_step(cfg_.seed, step_, cfg_.rank_key, cfg_.sign_row_offset);
    ElboBreakdown b = elbo_loss_and_grads(*graph_, x, y, beta, n_train, plan, grads);
    b.step = step_;
    return b;
}

template <class T>
std::vector<const TensorT<T>*> grads_in_param_order(ModelGraphT<T>& g,
                                                    const GraphGrads<T>& grads) {
    std::vector<const TensorT<T>*> out;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (!g.layers[i].is_variational()) continue;
        out.push_back(&grads.dmu[i]);
        out.push_back(&grads.drho[i]);
        if (g.layers[i].has_bias) out.push_back(&grads.dbias[i]);
    }
    return out;
}

template <class T>
void TrainerT<T>::apply_grads(const GraphGrads<T>& grads) {
    auto params = graph_->named_params();
    auto gptrs = grads_in_param_order(*graph_, grads);
    opt_.step(params, gptrs);
    ++step_;
}

template <class T>
std::vector<EpochMetrics> TrainerT<T>::run(const TensorT<T>& images,
                                           const std::vector<int32_t>& labels) {
    int64_t n = images.shape.empty() ? 0 : images.shape[0];
    if (n == 0) fail(ErrorKind::Data, "train: empty dataset");
    if (static_cast<int64_t>(labels.size()) != n)
        fail(ErrorKind::Data, "train: image/label count mismatch");
    int64_t per = images.size() / n;
    int64_t n_train = cfg_.n_train_override > 0 ? cfg_.n_train_override : n;
    int64_t steps_per_epoch = (n + cfg_.batch_size - 1) / cfg_.batch_size;

    std::vector<EpochMetrics> history;
    for (int64_t e = 0; e < cfg_.epochs; ++e) {
        auto t0 = std::chrono::steady_clock::now();
        uint64_t epoch_index = step_ / static_cast<uint64_t>(steps_per_epoch);
        auto order = epoch_permutation(cfg_.seed, epoch_index, n);
        EpochMetrics m;
        m.epoch = static_cast<int64_t>(epoch_index);
        int64_t steps = 0;
        for (int64_t at = 0; at < n; at += cfg_.batch_size, ++steps) {
            int64_t b = std::min<int64_t>(cfg_.batch_size, n - at);
            TensorT<T> x({b, images.shape[1], images.shape[2], images.shape[3]});
            std::vector<int32_t> y(static_cast<size_t>(b));
            for (int64_t i = 0; i < b; ++i) {
                int64_t src = order[static_cast<size_t>(at + i)];
                std::copy(images.ptr() + src * per, images.ptr() + (src + 1) * per,
                          x.ptr() + i * per);
                y[static_cast<size_t>(i)] = labels[static_cast<size_t>(src)];
            }
            GraphGrads<T> grads;
            ElboBreakdown bd = compute_grads(x, y, n_train, grads);
            apply_grads(grads);
            m.nll += bd.nll;
            m.kl += bd.kl;
            m.beta += bd.beta;
            m.total += bd.total;
        }
        m.nll /= steps; m.kl /= steps; m.beta /= steps; m.total /= steps;
        m.train_accuracy = mean_weight_accuracy(*graph_, images, labels);
        m.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!cfg_.metrics_csv.empty()) append_metrics_csv(cfg_.metrics_csv, m);
        history.push_back(m);
    }
    return history;
}

template class TrainerT<float>;
template class TrainerT<double>;
template double mean_weight_accuracy<float>(const ModelGraphT<float>&, const TensorT<float>&,
                                            const std::vector<int32_t>&, int64_t);
template double mean_weight_accuracy<double>(const ModelGraphT<double>&, const TensorT<double>&,
                                             const std::vector<int32_t>&, int64_t);
template std::vector<const TensorT<float>*> grads_in_param_order<float>(
    ModelGraphT<float>&, const GraphGrads<float>&);
template std::vector<const TensorT<double>*> grads_in_param_order<double>(
    ModelGraphT<double>&, const GraphGrads<double>&);

} // namespace bnnkit
