#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace bnnkit {

// Little-endian encoding helpers used by every binary format in the project
// (checkpoints, prune reports, wire frames). Hosts are assumed byte-addressed;
// on a big-endian host the byte swaps below keep the files portable.

namespace detail {
template <class T>
inline T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        T out;
        auto* s = reinterpret_cast<const unsigned char*>(&v);
        auto* d = reinterpret_cast<unsigned char*>(&out);
        for (size_t i = 0; i < sizeof(T); ++i) d[i] = s[sizeof(T) - 1 - i];
        return out;
    }
    return v;
}
} // namespace detail

class ByteWriter {
public:
    std::vector<uint8_t>& bytes() { return buf_; }
    const std::vector<uint8_t>& bytes() const { return buf_; }
    size_t size() const { return buf_.size(); }

    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        T le = detail::to_le(v);
        const auto* p = reinterpret_cast<const uint8_t*>(&le);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* p, size_t n) {
        const auto* b = reinterpret_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void put_string(const std::string& s) {
        put<uint16_t>(static_cast<uint16_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    template <class T>
    void put_array(const T* p, size_t n) {
        if constexpr (std::endian::native == std::endian::little) {
            put_bytes(p, n * sizeof(T));
        } else {
            for (size_t i = 0; i < n; ++i) put(p[i]);
        }
    }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t size, std::string what)
        : data_(data), size_(size), what_(std::move(what)) {}

    size_t offset() const { return at_; }
    size_t remaining() const { return size_ - at_; }

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + at_, sizeof(T));
        at_ += sizeof(T);
        return detail::to_le(v);
    }
    void get_bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, data_ + at_, n);
        at_ += n;
    }
    std::string get_string() {
        uint16_t n = get<uint16_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + at_), n);
        at_ += n;
        return s;
    }
    template <class T>
    void get_array(T* p, size_t n) {
        if constexpr (std::endian::native == std::endian::little) {
            get_bytes(p, n * sizeof(T));
        } else {
            for (size_t i = 0; i < n; ++i) p[i] = get<T>();
        }
    }

    [[noreturn]] void corrupt(const std::string& why) const {
        fail(ErrorKind::Integrity,
             what_ + ": " + why + " at byte " + std::to_string(at_));
    }

private:
    void need(size_t n) const {
        if (at_ + n > size_)
            fail(ErrorKind::Integrity, what_ + ": truncated at byte " + std::to_string(at_) +
                                           " (need " + std::to_string(n) + " more bytes)");
    }
    const uint8_t* data_;
    size_t size_;
    size_t at_ = 0;
    std::string what_;
};

inline void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::NotFound, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Integrity, "short write to '" + path + "'");
}

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) fail(ErrorKind::NotFound, "cannot open '" + path + "'");
    auto size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) fail(ErrorKind::Integrity, "short read from '" + path + "'");
    return bytes;
}

// CRC-32 (IEEE 802.3), used as the checkpoint trailer
uint32_t crc32(const uint8_t* data, size_t n);

} // namespace bnnkit
