#include "io/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "io/checkpoint.hpp"

namespace bnnkit {

template <class T>
Manifest build_manifest(const ModelGraphT<T>& g) {
    Manifest m;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& s = g.layers[i];
        if (!s.is_variational()) {
            m.layer_entries.emplace_back(s.name, "-");
            continue;
        }
        m.layer_entries.emplace_back(s.name, s.name + "/kernel");
        m.layer_entries.emplace_back(s.name, s.name + "/un-transformed scale");
        if (s.has_bias) m.layer_entries.emplace_back(s.name, s.name + "/bias");
    }
    m.ops["input"] = "input";
    m.ops["output"] = g.layers.empty() ? "output" : g.layers.back().name + "/logits";
    m.ops["sample"] = "mc_sample";
    m.ops["accuracy"] = "accuracy";
    return m;
}

void write_manifest(const Manifest& m, const std::string& dir) {
    {
        std::ofstream out(dir + "/LayerNames.txt");
        if (!out) fail(ErrorKind::NotFound, "cannot write '" + dir + "/LayerNames.txt'");
        for (const auto& [layer, var] : m.layer_entries) out << layer << ": " << var << "\n";
    }
    {
        std::ofstream out(dir + "/OpsNames.txt");
        if (!out) fail(ErrorKind::NotFound, "cannot write '" + dir + "/OpsNames.txt'");
        for (const auto& [key, value] : m.ops) out << key << ": " << value << "\n";
    }
}

namespace {

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::NotFound, "manifest file '" + path + "' not found");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto colon = line.find(": ");
        if (colon == std::string::npos)
            fail(ErrorKind::Parse, "'" + path + "' line " + std::to_string(lineno) +
                                       ": expected '<name>: <value>', got '" + line + "'");
        out.emplace_back(line.substr(0, colon), line.substr(colon + 2));
    }
    return out;
}

} // namespace

Manifest parse_manifest(const std::string& dir) {
    Manifest m;
    m.layer_entries = parse_kv_file(dir + "/LayerNames.txt");
    for (auto& [key, value] : parse_kv_file(dir + "/OpsNames.txt")) m.ops[key] = value;
    return m;
}

void verify_manifest_against_checkpoint(const Manifest& m, const std::string& ckpt_path) {
    auto names = checkpoint_blob_names(ckpt_path);
    for (const auto& [layer, var] : m.layer_entries) {
        if (var == "-") continue;
        if (std::find(names.begin(), names.end(), var) == names.end())
            fail(ErrorKind::Consistency, "manifest variable '" + var +
                                             "' is missing from checkpoint '" + ckpt_path + "'");
    }
}

template Manifest build_manifest<float>(const ModelGraphT<float>&);
template Manifest build_manifest<double>(const ModelGraphT<double>&);

} // namespace bnnkit
