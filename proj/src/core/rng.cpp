#include "core/rng.hpp"

#include <cmath>

namespace bnnkit {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

} // namespace

std::array<uint32_t, 4> SeededRng::philox4x32(const std::array<uint32_t, 4>& ctr,
                                              const std::array<uint32_t, 2>& key) {
    std::array<uint32_t, 4> c = ctr;
    uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        if (round > 0) { k0 += kPhiloxW0; k1 += kPhiloxW1; }
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }
    return c;
}

uint32_t SeededRng::next_u32() {
    uint64_t block = word_index_ >> 2;
    if (block != cached_block_) {
        std::array<uint32_t, 4> ctr = {
            static_cast<uint32_t>(block), static_cast<uint32_t>(block >> 32),
            static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
        std::array<uint32_t, 2> key = {static_cast<uint32_t>(seed_),
                                       static_cast<uint32_t>(seed_ >> 32)};
        cache_ = philox4x32(ctr, key);
        cached_block_ = block;
    }
    return cache_[word_index_++ & 3];
}

double SeededRng::uniform() {
    // (x + 0.5) / 2^32 lies strictly inside (0,1)
    return (static_cast<double>(next_u32()) + 0.5) * (1.0 / 4294967296.0);
}

double SeededRng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double SeededRng::sign() {
    return (next_u32() & 0x80000000u) ? 1.0 : -1.0;
}

uint64_t derive_stream(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x8000000080001239ull;
    for (uint64_t p : parts) h = splitmix64(h ^ p);
    return h;
}

template <class T>
TensorT<T> sample_normal(SeededRng& rng, std::vector<int64_t> shape) {
    TensorT<T> t(std::move(shape));
    int64_t n = t.size();
    int64_t i = 0;
    // pairwise Box-Muller: two normals per two uniforms
    for (; i + 1 < n; i += 2) {
        double u1 = rng.uniform();
        double u2 = rng.uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = kTwoPi * u2;
        t.data[static_cast<size_t>(i)] = static_cast<T>(r * std::cos(a));
        t.data[static_cast<size_t>(i + 1)] = static_cast<T>(r * std::sin(a));
    }
    if (i < n) t.data[static_cast<size_t>(i)] = static_cast<T>(rng.normal());
    return t;
}

template <class T>
TensorT<T> sample_sign(SeededRng& rng, std::vector<int64_t> shape) {
    TensorT<T> t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t.data[static_cast<size_t>(i)] = static_cast<T>(rng.sign());
    return t;
}

template <class T>
TensorT<T> sample_sign_rows(uint64_t seed, uint64_t stream, int64_t rows, int64_t cols,
                            int64_t row_offset) {
    TensorT<T> t({rows, cols});
    SeededRng rng(seed, stream);
    for (int64_t r = 0; r < rows; ++r) {
        rng.seek(static_cast<uint64_t>((row_offset + r) * cols));
        for (int64_t j = 0; j < cols; ++j)
            t.data[static_cast<size_t>(r * cols + j)] = static_cast<T>(rng.sign());
    }
    return t;
}

double normal_at(uint64_t seed, uint64_t stream, uint64_t flat_index) {
    SeededRng rng(seed, stream);
    uint64_t pair = flat_index >> 1;
    rng.seek(pair * 2);
    double u1 = rng.uniform();
    double u2 = rng.uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = kTwoPi * u2;
    return (flat_index & 1) ? r * std::sin(a) : r * std::cos(a);
}

#define BNNKIT_INSTANTIATE(T)                                                           \
    template TensorT<T> sample_normal<T>(SeededRng&, std::vector<int64_t>);             \
    template TensorT<T> sample_sign<T>(SeededRng&, std::vector<int64_t>);               \
    template TensorT<T> sample_sign_rows<T>(uint64_t, uint64_t, int64_t, int64_t, int64_t);

BNNKIT_INSTANTIATE(float)
BNNKIT_INSTANTIATE(double)
#undef BNNKIT_INSTANTIATE

} // namespace bnnkit
