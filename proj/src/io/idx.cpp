#include "io/idx.hpp"

#include <zlib.h>

#include <cstring>

#include "io/binary.hpp"

namespace bnnkit {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

bool looks_gzip(const std::vector<uint8_t>& b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in, const std::string& what) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        fail(ErrorKind::Integrity, what + ": zlib init failed");
    std::vector<uint8_t> out;
    out.reserve(in.size() * 4);
    std::vector<uint8_t> chunk(1 << 16);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            fail(ErrorKind::Integrity, what + ": gzip stream corrupt");
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::vector<uint8_t> gzip_bytes(const std::vector<uint8_t>& in) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        fail(ErrorKind::Integrity, "zlib deflate init failed");
    std::vector<uint8_t> out;
    std::vector<uint8_t> chunk(1 << 16);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    do {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = deflate(&zs, Z_FINISH);
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    } while (rc != Z_STREAM_END);
    deflateEnd(&zs);
    return out;
}

std::vector<uint8_t> read_maybe_gzip(const std::string& path) {
    auto bytes = read_file(path);
    if (looks_gzip(bytes)) return gunzip(bytes, "'" + path + "'");
    return bytes;
}

uint32_t read_be32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

} // namespace

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
    auto img = read_maybe_gzip(images_path);
    if (img.size() < 16) fail(ErrorKind::Format, "'" + images_path + "': too short for IDX");
    uint32_t magic = read_be32(img.data());
    if (magic != kImageMagic)
        fail(ErrorKind::Format, "'" + images_path + "': magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", magic);
            return std::string(buf);
        }() + " is not an IDX image file (expected 0x00000803)");
    uint32_t n = read_be32(img.data() + 4);
    uint32_t rows = read_be32(img.data() + 8);
    uint32_t cols = read_be32(img.data() + 12);
    size_t need = 16 + static_cast<size_t>(n) * rows * cols;
    if (img.size() < need)
        fail(ErrorKind::Integrity, "'" + images_path + "': truncated pixel payload");

    auto lab = read_maybe_gzip(labels_path);
    if (lab.size() < 8) fail(ErrorKind::Format, "'" + labels_path + "': too short for IDX");
    uint32_t lmagic = read_be32(lab.data());
    if (lmagic != kLabelMagic)
        fail(ErrorKind::Format,
             "'" + labels_path + "': not an IDX label file (expected magic 0x00000801)");
    uint32_t ln = read_be32(lab.data() + 4);
    if (ln != n)
        fail(ErrorKind::Data, "image/label count mismatch: " + std::to_string(n) + " images vs " +
                                  std::to_string(ln) + " labels");
    if (lab.size() < 8 + ln)
        fail(ErrorKind::Integrity, "'" + labels_path + "': truncated label payload");

    Dataset d;
    d.images = Tensor({n, rows, cols, 1});
    const uint8_t* px = img.data() + 16;
    for (int64_t i = 0; i < d.images.size(); ++i)
        d.images.data[static_cast<size_t>(i)] = static_cast<float>(px[i]) / 255.0f;
    d.labels.resize(n);
    for (uint32_t i = 0; i < n; ++i) d.labels[i] = lab[8 + i];
    d.split = "full";
    return d;
}

std::pair<Dataset, Dataset> split_train_heldout(const Dataset& d, int64_t n_train) {
    d.validate();
    if (n_train > d.size())
        fail(ErrorKind::Data, "split: dataset has only " + std::to_string(d.size()) +
                                  " examples, cannot take " + std::to_string(n_train));
    return {d.slice(0, n_train, "train"), d.slice(n_train, d.size(), "held-out")};
}

void write_idx_images(const Tensor& images, const std::string& path, bool gzip) {
    if (images.rank() != 4 || images.shape[3] != 1)
        fail(ErrorKind::Data, "write_idx_images: expected [N,H,W,1], got " + images.shape_str());
    std::vector<uint8_t> out;
    write_be32(out, kImageMagic);
    write_be32(out, static_cast<uint32_t>(images.shape[0]));
    write_be32(out, static_cast<uint32_t>(images.shape[1]));
    write_be32(out, static_cast<uint32_t>(images.shape[2]));
    out.reserve(out.size() + static_cast<size_t>(images.size()));
    for (int64_t i = 0; i < images.size(); ++i) {
        float v = images.data[static_cast<size_t>(i)] * 255.0f + 0.5f;
        out.push_back(static_cast<uint8_t>(std::clamp(v, 0.0f, 255.0f)));
    }
    write_file(path, gzip ? gzip_bytes(out) : out);
}

void write_idx_labels(const std::vector<int32_t>& labels, const std::string& path, bool gzip) {
    std::vector<uint8_t> out;
    write_be32(out, kLabelMagic);
    write_be32(out, static_cast<uint32_t>(labels.size()));
    for (int32_t l : labels) {
        if (l < 0 || l > 255) fail(ErrorKind::Data, "write_idx_labels: label out of u8 range");
        out.push_back(static_cast<uint8_t>(l));
    }
    write_file(path, gzip ? gzip_bytes(out) : out);
}

uint32_t crc32(const uint8_t* data, size_t n) {
    return static_cast<uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

} // namespace bnnkit
