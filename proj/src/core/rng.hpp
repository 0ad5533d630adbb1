#pragma once

#include <array>
#include <cstdint>

#include "core/tensor.hpp"

namespace bnnkit {

// Counter-based generator built on Philox4x32-10 (see docs/formats.md for the
// test vectors it is pinned to). The full state is (seed, stream, word_index),
// so streams can be replayed, checkpointed, and accessed at arbitrary offsets.
class SeededRng {
public:
    SeededRng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }
    uint64_t word_index() const { return word_index_; }
    void seek(uint64_t word_index) { word_index_ = word_index; }

    uint32_t next_u32();

    // uniform in (0,1); never returns exactly 0 or 1
    double uniform();

    // standard normal via Box-Muller on two uniforms (cosine branch)
    double normal();

    // uniform on {-1, +1}; one counter word per sign
    double sign();

    static std::array<uint32_t, 4> philox4x32(const std::array<uint32_t, 4>& ctr,
                                              const std::array<uint32_t, 2>& key);

private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t word_index_ = 0;
    uint64_t cached_block_ = ~uint64_t{0};
    std::array<uint32_t, 4> cache_{};
};

// Derives a child stream id from mixed tag values; used to key noise by
// (purpose, layer, step, rank, ...) so every consumer gets an independent,
// replayable stream.
uint64_t derive_stream(std::initializer_list<uint64_t> parts);

// Tags for derive_stream. Values are part of the checkpoint/replay contract.
enum StreamTag : uint64_t {
    kStreamInit = 1,      // parameter initialization
    kStreamEps = 2,       // per-layer weight noise during training
    kStreamSignIn = 3,    // per-example input sign rows
    kStreamSignOut = 4,   // per-example output sign rows
    kStreamShuffle = 5,   // epoch shuffling
    kStreamMc = 6,        // Monte-Carlo inference noise
    kStreamData = 7,      // synthetic dataset generation
};

template <class T>
TensorT<T> sample_normal(SeededRng& rng, std::vector<int64_t> shape);

template <class T>
TensorT<T> sample_sign(SeededRng& rng, std::vector<int64_t> shape);

// Sign matrix of shape [rows x cols] where row r is read at word offset
// (row_offset + r) * cols. Rows depend only on their global row index, which
// keeps per-example noise identical no matter how a batch is sharded.
template <class T>
TensorT<T> sample_sign_rows(uint64_t seed, uint64_t stream, int64_t rows, int64_t cols,
                            int64_t row_offset);

// The value sample_normal would have written at flat_index; lets sparse
// kernels draw noise only for kept weights while matching the dense tensor
// bit for bit.
double normal_at(uint64_t seed, uint64_t stream, uint64_t flat_index);

} // namespace bnnkit
