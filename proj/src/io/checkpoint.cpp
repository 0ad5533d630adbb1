#include "io/checkpoint.hpp"

#include "io/binary.hpp"

namespace bnnkit {

namespace {

constexpr char kMagic[4] = {'B', 'N', 'N', 'C'};
constexpr uint32_t kVersion = 1;

template <class T>
constexpr uint8_t dtype_tag() {
    return std::is_same_v<T, float> ? 0 : 1;
}

template <class T>
void put_blob(ByteWriter& w, const std::string& name, const TensorT<T>& t) {
    w.put_string(name);
    w.put<uint8_t>(static_cast<uint8_t>(t.rank()));
    for (int64_t d : t.shape) w.put<int64_t>(d);
    w.put<uint64_t>(static_cast<uint64_t>(t.size()));
    w.put_array(t.ptr(), static_cast<size_t>(t.size()));
}

template <class T>
std::pair<std::string, TensorT<T>> get_blob(ByteReader& r) {
    std::string name = r.get_string();
    uint8_t rank = r.get<uint8_t>();
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = r.get<int64_t>();
    uint64_t count = r.get<uint64_t>();
    TensorT<T> t;
    if (TensorT<T>::count(shape) != static_cast<int64_t>(count)) r.corrupt("blob count mismatch");
    t = TensorT<T>(shape);
    r.get_array(t.ptr(), count);
    return {std::move(name), std::move(t)};
}

void put_layer(ByteWriter& w, const LayerSpec& s) {
    w.put<uint8_t>(static_cast<uint8_t>(s.kind));
    w.put_string(s.name);
    switch (s.kind) {
        case LayerKind::DenseFlipout:
            w.put<int64_t>(s.in_units);
            w.put<int64_t>(s.out_units);
            w.put<uint8_t>(s.has_bias ? 1 : 0);
            break;
        case LayerKind::Conv2DFlipout:
            w.put<int64_t>(s.kh);
            w.put<int64_t>(s.kw);
            w.put<int64_t>(s.cin);
            w.put<int64_t>(s.cout);
            w.put<int64_t>(s.stride);
            w.put<uint8_t>(s.padding == Padding::Same ? 1 : 0);
            w.put<uint8_t>(s.has_bias ? 1 : 0);
            break;
        case LayerKind::MaxPool2D:
            w.put<int64_t>(s.window);
            w.put<int64_t>(s.pool_stride);
            break;
        case LayerKind::Flatten:
        case LayerKind::ReLU:
            break;
    }
}

LayerSpec get_layer(ByteReader& r) {
    uint8_t kind = r.get<uint8_t>();
    if (kind > static_cast<uint8_t>(LayerKind::ReLU)) r.corrupt("unknown layer kind");
    std::string name = r.get_string();
    switch (static_cast<LayerKind>(kind)) {
        case LayerKind::DenseFlipout: {
            int64_t in = r.get<int64_t>(), out = r.get<int64_t>();
            bool bias = r.get<uint8_t>() != 0;
            return LayerSpec::dense(name, in, out, bias);
        }
        case LayerKind::Conv2DFlipout: {
            int64_t kh = r.get<int64_t>(), kw = r.get<int64_t>();
            int64_t cin = r.get<int64_t>(), cout = r.get<int64_t>();
            int64_t stride = r.get<int64_t>();
            Padding pad = r.get<uint8_t>() ? Padding::Same : Padding::Valid;
            bool bias = r.get<uint8_t>() != 0;
            return LayerSpec::conv(name, kh, kw, cin, cout, stride, pad, bias);
        }
        case LayerKind::MaxPool2D: {
            int64_t w = r.get<int64_t>(), s = r.get<int64_t>();
            return LayerSpec::maxpool(name, w, s);
        }
        case LayerKind::Flatten:
            return LayerSpec::flatten(name);
        case LayerKind::ReLU:
        default:
            return LayerSpec::relu(name);
    }
}

// header + payload without the crc trailer
template <class T>
std::vector<uint8_t> encode(const CheckpointT<T>& c) {
    ByteWriter w;
    w.put_bytes(kMagic, 4);
    w.put<uint32_t>(kVersion);
    w.put<uint8_t>(dtype_tag<T>());
    w.put<uint8_t>(c.optimizer.has_value() ? 1 : 0);
    w.put<uint8_t>(c.graph.deterministic ? 1 : 0);
    w.put<uint64_t>(c.seed);
    w.put<uint64_t>(c.step);

    w.put<uint32_t>(static_cast<uint32_t>(c.graph.layers.size()));
    for (const auto& s : c.graph.layers) put_layer(w, s);

    uint32_t blob_count = 0;
    for (size_t i = 0; i < c.graph.layers.size(); ++i) {
        if (!c.graph.layers[i].is_variational()) continue;
        blob_count += 2;
        if (c.graph.layers[i].has_bias) ++blob_count;
        if (c.graph.params[i].w.has_mask()) ++blob_count;
    }
    w.put<uint32_t>(blob_count);
    for (size_t i = 0; i < c.graph.layers.size(); ++i) {
        const auto& s = c.graph.layers[i];
        if (!s.is_variational()) continue;
        const auto& p = c.graph.params[i];
        put_blob(w, s.name + "/kernel", p.w.mu);
        put_blob(w, s.name + "/un-transformed scale", p.w.rho);
        if (s.has_bias) put_blob(w, s.name + "/bias", p.bias);
        if (p.w.has_mask()) put_blob(w, s.name + "/mask", p.w.mask);
    }

    if (c.optimizer) {
        const auto& opt = *c.optimizer;
        const auto& cfg = opt.config();
        w.put<uint8_t>(static_cast<uint8_t>(cfg.kind));
        w.put<double>(cfg.lr);
        w.put<double>(cfg.adam_beta1);
        w.put<double>(cfg.adam_beta2);
        w.put<double>(cfg.rmsprop_decay);
        w.put<double>(cfg.eps);
        w.put<uint64_t>(opt.step_count());
        w.put<uint32_t>(static_cast<uint32_t>(opt.slot_m().size()));
        for (const auto& t : opt.slot_m()) put_blob(w, "m", t);
        w.put<uint32_t>(static_cast<uint32_t>(opt.slot_v().size()));
        for (const auto& t : opt.slot_v()) put_blob(w, "v", t);
    }
    return std::move(w.bytes());
}

} // namespace

std::string checkpoint_path(const std::string& dir, uint64_t iteration) {
    return dir + "/model-" + std::to_string(iteration) + ".ckpt";
}

template <class T>
void save_checkpoint(const CheckpointT<T>& c, const std::string& path) {
    std::vector<uint8_t> bytes = encode(c);
    uint32_t crc = crc32(bytes.data(), bytes.size());
    ByteWriter tail;
    tail.put<uint32_t>(crc);
    bytes.insert(bytes.end(), tail.bytes().begin(), tail.bytes().end());
    write_file(path, bytes);
}

namespace {

ByteReader open_checked(const std::vector<uint8_t>& bytes, const std::string& path) {
    if (bytes.size() < 8)
        fail(ErrorKind::Integrity, "checkpoint '" + path + "': file too short");
    uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    stored = detail::to_le(stored);
    uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored != actual)
        fail(ErrorKind::Integrity, "checkpoint '" + path + "': checksum mismatch at byte " +
                                       std::to_string(bytes.size() - 4) +
                                       " (file is corrupt, nothing was loaded)");
    ByteReader r(bytes.data(), bytes.size() - 4, "checkpoint '" + path + "'");
    char magic[4];
    r.get_bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) r.corrupt("bad magic");
    uint32_t version = r.get<uint32_t>();
    if (version != kVersion)
        fail(ErrorKind::Version, "checkpoint '" + path + "': version " + std::to_string(version) +
                                     " unsupported (expected " + std::to_string(kVersion) + ")");
    return r;
}

} // namespace

template <class T>
CheckpointT<T> load_checkpoint(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r = open_checked(bytes, path);
    uint8_t dtype = r.get<uint8_t>();
    if (dtype != dtype_tag<T>())
        fail(ErrorKind::Format, "checkpoint '" + path + "' holds " +
                                    (dtype ? std::string("f64") : std::string("f32")) +
                                    " parameters; reopen with the matching precision mode");
    bool has_opt = r.get<uint8_t>() != 0;
    bool deterministic = r.get<uint8_t>() != 0;
    CheckpointT<T> c;
    c.seed = r.get<uint64_t>();
    c.step = r.get<uint64_t>();

    uint32_t n_layers = r.get<uint32_t>();
    std::vector<LayerSpec> specs;
    specs.reserve(n_layers);
    for (uint32_t i = 0; i < n_layers; ++i) specs.push_back(get_layer(r));
    c.graph = ModelGraphT<T>::make(std::move(specs));
    c.graph.deterministic = deterministic;

    uint32_t n_blobs = r.get<uint32_t>();
    for (uint32_t i = 0; i < n_blobs; ++i) {
        auto [name, tensor] = get_blob<T>(r);
        auto slash = name.rfind('/');
        if (slash == std::string::npos) r.corrupt("blob '" + name + "' has no layer prefix");
        std::string layer = name.substr(0, slash);
        std::string var = name.substr(slash + 1);
        bool placed = false;
        for (size_t li = 0; li < c.graph.layers.size(); ++li) {
            if (c.graph.layers[li].name != layer) continue;
            auto& p = c.graph.params[li];
            if (var == "kernel") p.w.mu = std::move(tensor);
            else if (var == "un-transformed scale") p.w.rho = std::move(tensor);
            else if (var == "bias") p.bias = std::move(tensor);
            else if (var == "mask") p.w.mask = std::move(tensor);
            else r.corrupt("blob '" + name + "' names an unknown variable");
            placed = true;
            break;
        }
        if (!placed) r.corrupt("blob '" + name + "' names an unknown layer");
    }

    if (has_opt) {
        OptimizerConfig cfg;
        cfg.kind = static_cast<OptimizerKind>(r.get<uint8_t>());
        cfg.lr = r.get<double>();
        cfg.adam_beta1 = r.get<double>();
        cfg.adam_beta2 = r.get<double>();
        cfg.rmsprop_decay = r.get<double>();
        cfg.eps = r.get<double>();
        OptimizerT<T> opt(cfg);
        opt.set_step_count(r.get<uint64_t>());
        uint32_t nm = r.get<uint32_t>();
        for (uint32_t i = 0; i < nm; ++i) opt.slot_m().push_back(get_blob<T>(r).second);
        uint32_t nv = r.get<uint32_t>();
        for (uint32_t i = 0; i < nv; ++i) opt.slot_v().push_back(get_blob<T>(r).second);
        c.optimizer = std::move(opt);
    }
    if (r.remaining() != 0) r.corrupt("trailing bytes");
    return c;
}

int checkpoint_dtype(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r = open_checked(bytes, path);
    return r.get<uint8_t>();
}

std::vector<std::string> checkpoint_blob_names(const std::string& path) {
    auto bytes = read_file(path);
    ByteReader r = open_checked(bytes, path);
    uint8_t dtype = r.get<uint8_t>();
    size_t scalar = dtype == 0 ? sizeof(float) : sizeof(double);
    r.get<uint8_t>();
    r.get<uint8_t>();
    r.get<uint64_t>();
    r.get<uint64_t>();
    uint32_t n_layers = r.get<uint32_t>();
    for (uint32_t i = 0; i < n_layers; ++i) get_layer(r);
    uint32_t n_blobs = r.get<uint32_t>();
    std::vector<std::string> names;
    for (uint32_t i = 0; i < n_blobs; ++i) {
        names.push_back(r.get_string());
        uint8_t rank = r.get<uint8_t>();
        for (uint8_t d = 0; d < rank; ++d) r.get<int64_t>();
        uint64_t count = r.get<uint64_t>();
        std::vector<uint8_t> skip(count * scalar);
        r.get_bytes(skip.data(), skip.size());
    }
    return names;
}

template void save_checkpoint<float>(const CheckpointT<float>&, const std::string&);
template void save_checkpoint<double>(const CheckpointT<double>&, const std::string&);
template CheckpointT<float> load_checkpoint<float>(const std::string&);
template CheckpointT<double> load_checkpoint<double>(const std::string&);

} // namespace bnnkit
