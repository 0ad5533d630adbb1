#pragma once

#include <map>

#include "nn/graph.hpp"

namespace bnnkit {

// The two plain-text companions of a checkpoint: LayerNames.txt maps every
// layer to its variables (one "layer: variable" line each; parameterless
// layers carry "-"), OpsNames.txt lists the graph endpoints ("key: value").
struct Manifest {
    std::vector<std::pair<std::string, std::string>> layer_entries;
    std::map<std::string, std::string> ops;
};

template <class T>
Manifest build_manifest(const ModelGraphT<T>& g);

void write_manifest(const Manifest& m, const std::string& dir);
Manifest parse_manifest(const std::string& dir);

// Every variable named by the manifest must exist in the checkpoint.
void verify_manifest_against_checkpoint(const Manifest& m, const std::string& ckpt_path);

} // namespace bnnkit
