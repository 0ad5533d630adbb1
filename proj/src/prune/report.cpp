#include "prune/report.hpp"

#include <chrono>
#include <fstream>

#include "io/binary.hpp"

namespace bnnkit {

namespace {
constexpr char kMagic[4] = {'B', 'P', 'R', 'N'};
constexpr uint32_t kVersion = 1;
} // namespace

void write_prune_report(const PruneReport& r, const std::string& path) {
    ByteWriter w;
    w.put_bytes(kMagic, 4);
    w.put<uint32_t>(kVersion);
    w.put<float>(static_cast<float>(r.threshold));
    uint32_t n = r.samples.rank() >= 1 ? static_cast<uint32_t>(r.samples.shape[0]) : 0;
    uint32_t features = n > 0 ? static_cast<uint32_t>(r.samples.size() / n) : 0;
    uint32_t s = r.predictive.rank() == 3 ? static_cast<uint32_t>(r.predictive.shape[0]) : 0;
    uint32_t c = r.predictive.rank() == 3 ? static_cast<uint32_t>(r.predictive.shape[2]) : 0;
    w.put<uint32_t>(n);
    w.put<uint32_t>(features);
    w.put<uint32_t>(c);
    w.put<uint32_t>(s);
    w.put<uint32_t>(static_cast<uint32_t>(r.per_layer_nonzeros.size()));
    w.put<uint64_t>(static_cast<uint64_t>(r.total_nonzeros));

    w.put<uint64_t>(static_cast<uint64_t>(r.samples.size()));
    w.put_array(r.samples.ptr(), static_cast<size_t>(r.samples.size()));
    w.put<uint64_t>(static_cast<uint64_t>(r.labels.size()));
    for (int32_t l : r.labels) w.put<uint32_t>(static_cast<uint32_t>(l));
    w.put<uint64_t>(static_cast<uint64_t>(r.per_layer_nonzeros.size()));
    for (int64_t v : r.per_layer_nonzeros) w.put<uint64_t>(static_cast<uint64_t>(v));
    w.put<uint64_t>(static_cast<uint64_t>(r.predictive.size()));
    w.put_array(r.predictive.ptr(), static_cast<size_t>(r.predictive.size()));
    w.put<uint64_t>(1);
    w.put<double>(r.runtime_seconds);
    write_file(path, w.bytes());
}

PruneReport read_prune_report(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r(bytes.data(), bytes.size(), "prune report '" + path + "'");
    char magic[4];
    r.get_bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) r.corrupt("bad magic");
    uint32_t version = r.get<uint32_t>();
    if (version != kVersion)
        fail(ErrorKind::Version, "prune report version " + std::to_string(version) +
                                     " unsupported (expected " + std::to_string(kVersion) + ")");
    PruneReport out;
    out.threshold = r.get<float>();
    uint32_t n = r.get<uint32_t>();
    uint32_t features = r.get<uint32_t>();
    uint32_t c = r.get<uint32_t>();
    uint32_t s = r.get<uint32_t>();
    uint32_t layers = r.get<uint32_t>();
    out.total_nonzeros = static_cast<int64_t>(r.get<uint64_t>());

    uint64_t count = r.get<uint64_t>();
    if (count != static_cast<uint64_t>(n) * features) r.corrupt("sample section count mismatch");
    out.samples = Tensor({n, features});
    r.get_array(out.samples.ptr(), count);

    count = r.get<uint64_t>();
    if (count != n) r.corrupt("label section count mismatch");
    out.labels.resize(count);
    for (auto& l : out.labels) l = static_cast<int32_t>(r.get<uint32_t>());

    count = r.get<uint64_t>();
    if (count != layers) r.corrupt("nnz section count mismatch");
    out.per_layer_nonzeros.resize(count);
    for (auto& v : out.per_layer_nonzeros) v = static_cast<int64_t>(r.get<uint64_t>());

    count = r.get<uint64_t>();
    if (count != static_cast<uint64_t>(s) * n * c) r.corrupt("predictive section count mismatch");
    out.predictive = Tensor({s, n, c});
    r.get_array(out.predictive.ptr(), count);

    count = r.get<uint64_t>();
    if (count != 1) r.corrupt("runtime section count mismatch");
    out.runtime_seconds = r.get<double>();
    return out;
}

PruneReport make_prune_report(const ModelGraph& pruned, const PruneMask& mask,
                              const Dataset& test, int64_t mc_samples, uint64_t seed) {
    PruneReport rep;
    rep.threshold = mask.threshold;
    rep.per_layer_nonzeros = mask.per_layer_nonzeros;
    rep.total_nonzeros = mask.global_nonzeros;
    int64_t n = test.size();
    rep.samples = test.images.reshaped({n, test.images.size() / std::max<int64_t>(n, 1)});
    rep.labels = test.labels;
    auto t0 = std::chrono::steady_clock::now();
    PredictiveSamples ps = predict_mc(pruned, test.images, mc_samples, seed, test.labels);
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.predictive = std::move(ps.samples);
    return rep;
}

std::vector<SweepRow> prune_sweep(const ModelGraph& g, const Dataset& test,
                                  const std::vector<double>& percents, int64_t mc_samples,
                                  uint64_t seed) {
    test.validate();
    std::vector<SweepRow> rows;
    for (double pct : percents) {
        auto [pruned, mask] = prune_by_fraction(g, pct);
        SweepRow row;
        row.pct = pct;
        row.threshold = mask.threshold;
        row.per_layer_nonzeros = mask.per_layer_nonzeros;
        row.nnz_total = mask.global_nonzeros;
        auto t0 = std::chrono::steady_clock::now();
        PredictiveSamples ps = predict_mc(pruned, test.images, mc_samples, seed, test.labels);
        row.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.accuracy = accuracy(ps);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::NotFound, "cannot open '" + path + "'");
    out << "pct,threshold,accuracy,nnz_total,runtime_s\n";
    for (const auto& r : rows)
        out << r.pct << "," << r.threshold << "," << r.accuracy << "," << r.nnz_total << ","
            << r.runtime_seconds << "\n";
}

} // namespace bnnkit
