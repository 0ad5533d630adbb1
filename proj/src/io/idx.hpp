#pragma once

#include "io/dataset.hpp"

namespace bnnkit {

// IDX (the MNIST container format): big-endian magic + dims, raw u8 payload.
// Gzip-compressed files are decompressed transparently.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

// Splits an official-style training file into a usable train set and a
// held-out tail (50,000 / remainder for the 60k MNIST train file).
std::pair<Dataset, Dataset> split_train_heldout(const Dataset& d, int64_t n_train = 50000);

// Fixture/synthetic-data writers. `gzip` appends nothing to the path; pass a
// ".gz" path to keep conventions.
void write_idx_images(const Tensor& images, const std::string& path, bool gzip = false);
void write_idx_labels(const std::vector<int32_t>& labels, const std::string& path,
                      bool gzip = false);

} // namespace bnnkit
