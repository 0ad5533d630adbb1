#pragma once

#include <optional>

#include "nn/graph.hpp"
#include "train/optimizer.hpp"

namespace bnnkit {

// "BNNC" checkpoint: graph topology, named parameter blobs (kernel /
// un-transformed scale / bias / mask per layer), optional optimizer state,
// the training seed and step counter. Little-endian with a CRC-32 trailer;
// byte layout in docs/formats.md.
template <class T>
struct CheckpointT {
    ModelGraphT<T> graph;
    std::optional<OptimizerT<T>> optimizer;
    uint64_t seed = 0;
    uint64_t step = 0;
};

using Checkpoint = CheckpointT<float>;

// model-<iteration>.ckpt inside dir
std::string checkpoint_path(const std::string& dir, uint64_t iteration);

template <class T>
void save_checkpoint(const CheckpointT<T>& c, const std::string& path);

template <class T>
CheckpointT<T> load_checkpoint(const std::string& path);

// dtype tag without loading the payload: 0 = f32, 1 = f64
int checkpoint_dtype(const std::string& path);

// names of every parameter blob in the file (manifest cross-checks)
std::vector<std::string> checkpoint_blob_names(const std::string& path);

} // namespace bnnkit
