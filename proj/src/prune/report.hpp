#pragma once

#include "infer/mc.hpp"
#include "io/dataset.hpp"
#include "prune/prune.hpp"

namespace bnnkit {

// The record a pruning run leaves behind: the test samples it used, their
// labels, the surviving weight counts, the predictive distributions and the
// measured inference runtime. Serialized as the "BPRN" binary.
struct PruneReport {
    double threshold = 0;
    Tensor samples;               // [N x features] flattened test inputs
    std::vector<int32_t> labels;  // N
    int64_t total_nonzeros = 0;
    std::vector<int64_t> per_layer_nonzeros;
    Tensor predictive;            // [S x N x C]
    double runtime_seconds = 0;
};

void write_prune_report(const PruneReport& r, const std::string& path);
PruneReport read_prune_report(const std::string& path);

struct SweepRow {
    double pct = 0;
    double threshold = 0;
    double accuracy = 0;
    int64_t nnz_total = 0;
    double runtime_seconds = 0;
    std::vector<int64_t> per_layer_nonzeros;
};

// Prunes a copy of the graph at each percentage, measures test accuracy from
// the predictive mean over `mc_samples` passes, and collects runtimes.
std::vector<SweepRow> prune_sweep(const ModelGraph& g, const Dataset& test,
                                  const std::vector<double>& percents, int64_t mc_samples,
                                  uint64_t seed);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

// Builds the full report for one pruned graph evaluation.
PruneReport make_prune_report(const ModelGraph& pruned, const PruneMask& mask,
                              const Dataset& test, int64_t mc_samples, uint64_t seed);

} // namespace bnnkit
