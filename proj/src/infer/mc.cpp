#include "infer/mc.hpp"

#include <algorithm>
#include <fstream>

namespace bnnkit {

template <class T>
PredictiveSamplesT<T> predict_mc(const ModelGraphT<T>& g, const TensorT<T>& x, int64_t s,
                                 uint64_t seed, std::vector<int32_t> labels) {
    if (s < 1) fail(ErrorKind::Parameter, "predict_mc: S must be >= 1, got " + std::to_string(s));
    PredictiveSamplesT<T> ps;
    ps.labels = std::move(labels);
    for (int64_t i = 0; i < s; ++i) {
        NoisePlan plan = NoisePlan::mc_sample(seed, static_cast<uint64_t>(i));
        TensorT<T> probs = softmax(graph_forward(g, x, plan));
        if (i == 0) ps.samples = TensorT<T>({s, probs.shape[0], probs.shape[1]});
        std::copy(probs.data.begin(), probs.data.end(), ps.samples.ptr() + i * probs.size());
    }
    return ps;
}

template <class T>
TensorT<T> predictive_mean(const PredictiveSamplesT<T>& ps) {
    int64_t s = ps.mc_count(), b = ps.batch(), c = ps.classes();
    if (s < 1) fail(ErrorKind::Usage, "predictive_mean: no samples");
    TensorT<T> mean({b, c});
    for (int64_t i = 0; i < s; ++i) {
        const T* src = ps.samples.ptr() + i * b * c;
        for (int64_t k = 0; k < b * c; ++k) mean.data[static_cast<size_t>(k)] += src[k];
    }
    for (T& v : mean.data) v /= static_cast<T>(s);
    return mean;
}

template <class T>
double accuracy(const PredictiveSamplesT<T>& ps) {
    if (ps.labels.empty()) fail(ErrorKind::Usage, "accuracy: samples carry no labels");
    if (static_cast<int64_t>(ps.labels.size()) != ps.batch())
        fail(ErrorKind::Usage, "accuracy: label count does not match batch");
    TensorT<T> mean = predictive_mean(ps);
    int64_t b = ps.batch(), c = ps.classes();
    int64_t correct = 0;
    for (int64_t n = 0; n < b; ++n) {
        const T* row = mean.ptr() + n * c;
        int64_t best = 0;
        for (int64_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        correct += (best == ps.labels[static_cast<size_t>(n)]);
    }
    return static_cast<double>(correct) / static_cast<double>(b);
}

template <class T>
Histogram class_pdf_histogram(const PredictiveSamplesT<T>& ps, int64_t class_index,
                              int32_t true_class_filter, int64_t bins) {
    if (bins < 2) fail(ErrorKind::Parameter, "histogram: bins must be >= 2");
    if (class_index < 0 || class_index >= ps.classes())
        fail(ErrorKind::Parameter, "histogram: class index out of range");
    if (ps.labels.empty()) fail(ErrorKind::Usage, "histogram: samples carry no labels");
    Histogram h;
    h.edges.resize(static_cast<size_t>(bins) + 1);
    for (int64_t i = 0; i <= bins; ++i)
        h.edges[static_cast<size_t>(i)] = static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(static_cast<size_t>(bins), 0);
    int64_t s = ps.mc_count(), b = ps.batch(), c = ps.classes();
    for (int64_t n = 0; n < b; ++n) {
        if (ps.labels[static_cast<size_t>(n)] != true_class_filter) continue;
        ++h.matching_examples;
        for (int64_t i = 0; i < s; ++i) {
            double v = ps.samples.data[static_cast<size_t>((i * b + n) * c + class_index)];
            int64_t bin = std::min<int64_t>(static_cast<int64_t>(v * static_cast<double>(bins)),
                                            bins - 1);
            if (bin < 0) bin = 0;
            ++h.counts[static_cast<size_t>(bin)];
        }
    }
    if (h.matching_examples == 0)
        fail(ErrorKind::Data, "histogram: no examples with true class " +
                                  std::to_string(true_class_filter));
    return h;
}

namespace {

double ks_distance(std::vector<double>& a, std::vector<double>& b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

} // namespace

template <class T>
KsSummary mc_convergence(const PredictiveSamplesT<T>& small, const PredictiveSamplesT<T>& large) {
    if (small.batch() != large.batch() || small.classes() != large.classes())
        fail(ErrorKind::Usage, "mc_convergence: sample sets cover different batches");
    int64_t b = small.batch(), c = small.classes();
    KsSummary out;
    out.per_pair = TensorT<double>({b, c});
    for (int64_t n = 0; n < b; ++n)
        for (int64_t k = 0; k < c; ++k) {
            std::vector<double> xs, ys;
            xs.reserve(static_cast<size_t>(small.mc_count()));
            ys.reserve(static_cast<size_t>(large.mc_count()));
            for (int64_t i = 0; i < small.mc_count(); ++i)
                xs.push_back(small.samples.data[static_cast<size_t>((i * b + n) * c + k)]);
            for (int64_t i = 0; i < large.mc_count(); ++i)
                ys.push_back(large.samples.data[static_cast<size_t>((i * b + n) * c + k)]);
            double d = ks_distance(xs, ys);
            out.per_pair.at2(n, k) = d;
            out.max = std::max(out.max, d);
        }
    return out;
}

template <class T>
void write_predictive_csv(const PredictiveSamplesT<T>& ps, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::NotFound, "cannot open '" + path + "'");
    out << "example_id,class,mean,std\n";
    int64_t s = ps.mc_count(), b = ps.batch(), c = ps.classes();
    for (int64_t n = 0; n < b; ++n)
        for (int64_t k = 0; k < c; ++k) {
            double mean = 0, m2 = 0;
            for (int64_t i = 0; i < s; ++i)
                mean += ps.samples.data[static_cast<size_t>((i * b + n) * c + k)];
            mean /= static_cast<double>(s);
            for (int64_t i = 0; i < s; ++i) {
                double d = ps.samples.data[static_cast<size_t>((i * b + n) * c + k)] - mean;
                m2 += d * d;
            }
            double sd = s > 1 ? std::sqrt(m2 / static_cast<double>(s - 1)) : 0.0;
            out << n << "," << k << "," << mean << "," << sd << "\n";
        }
}

#define BNNKIT_INSTANTIATE(T)                                                                  \
    template PredictiveSamplesT<T> predict_mc<T>(const ModelGraphT<T>&, const TensorT<T>&,    \
                                                 int64_t, uint64_t, std::vector<int32_t>);    \
    template TensorT<T> predictive_mean<T>(const PredictiveSamplesT<T>&);                     \
    template double accuracy<T>(const PredictiveSamplesT<T>&);                                \
    template Histogram class_pdf_histogram<T>(const PredictiveSamplesT<T>&, int64_t, int32_t, \
                                              int64_t);                                       \
    template KsSummary mc_convergence<T>(const PredictiveSamplesT<T>&,                        \
                                         const PredictiveSamplesT<T>&);                       \
    template void write_predictive_csv<T>(const PredictiveSamplesT<T>&, const std::string&);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
