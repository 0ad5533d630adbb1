#pragma once

#include "io/dataset.hpp"

namespace bnnkit {

// Procedurally rendered 28x28 grayscale digits in the MNIST container shape.
// Each sample draws a digit glyph as anti-aliased strokes under a random
// affine jitter, then adds pixel noise; same seed, same bytes. This is the
// stand-in corpus for pipelines that have no MNIST files on disk.
struct SynthConfig {
    int64_t count = 10000;
    uint64_t seed = 7;
    double noise_std = 0.16;     // additive pixel noise
    double max_rotate = 0.30;    // radians
    double min_scale = 0.72, max_scale = 1.08;
    double max_shear = 0.18;
    double max_shift = 3.0;      // pixels
    double min_thick = 0.9, max_thick = 1.7;
    int distractor_strokes = 2;  // random clutter segments per image
};

Dataset make_synthetic_digits(const SynthConfig& cfg, std::string split_tag);

} // namespace bnnkit
