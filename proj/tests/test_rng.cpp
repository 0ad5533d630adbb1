#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"

using namespace bnnkit;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Random123 reference vectors (counter, key -> output)
    auto out = SeededRng::philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);

    out = SeededRng::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);

    out = SeededRng::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("identical (seed, stream, call sequence) is bitwise reproducible") {
    SeededRng a(123, 7), b(123, 7);
    auto ta = sample_normal<float>(a, {257});
    auto tb = sample_normal<float>(b, {257});
    for (int64_t i = 0; i < ta.size(); ++i)
        CHECK(ta.data[static_cast<size_t>(i)] == tb.data[static_cast<size_t>(i)]);
    CHECK(a.word_index() == b.word_index());

    auto sa = sample_sign<float>(a, {100});
    auto sb = sample_sign<float>(b, {100});
    for (int64_t i = 0; i < 100; ++i) CHECK(sa.data[static_cast<size_t>(i)] == sb.data[static_cast<size_t>(i)]);
}

TEST_CASE("distinct streams differ") {
    SeededRng a(123, 1), b(123, 2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += (a.next_u32() == b.next_u32());
    CHECK(same < 4);
}

TEST_CASE("normal sample moments over 1e6 draws") {
    SeededRng rng(2024, 0);
    const int64_t n = 1000000;
    auto t = sample_normal<double>(rng, {n});
    double mean = 0;
    for (double v : t.data) mean += v;
    mean /= static_cast<double>(n);
    double var = 0;
    for (double v : t.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    CHECK(std::abs(mean) < 0.005);
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("sign sample moments over 1e6 draws") {
    SeededRng rng(2024, 1);
    const int64_t n = 1000000;
    auto t = sample_sign<double>(rng, {n});
    double mean = 0;
    for (double v : t.data) {
        CHECK((v == 1.0 || v == -1.0));
        mean += v;
    }
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 0.005);
}

TEST_CASE("seek replays the stream at an offset") {
    SeededRng a(5, 9);
    std::vector<uint32_t> words(40);
    for (auto& w : words) w = a.next_u32();
    SeededRng b(5, 9);
    b.seek(17);
    CHECK(b.next_u32() == words[17]);
    b.seek(3);
    CHECK(b.next_u32() == words[3]);
    CHECK(b.next_u32() == words[4]);
}

TEST_CASE("sign rows depend only on the global row index") {
    // rows [2,5) of the full matrix equal a 3-row slice at offset 2
    auto full = sample_sign_rows<float>(77, 13, 6, 10, 0);
    auto part = sample_sign_rows<float>(77, 13, 3, 10, 2);
    for (int64_t r = 0; r < 3; ++r)
        for (int64_t j = 0; j < 10; ++j) CHECK(part.at2(r, j) == full.at2(r + 2, j));
}

TEST_CASE("derive_stream separates tag tuples") {
    CHECK(derive_stream({1, 2, 3}) != derive_stream({1, 3, 2}));
    CHECK(derive_stream({kStreamEps, 0, 0}) != derive_stream({kStreamSignIn, 0, 0}));
    CHECK(derive_stream({5}) == derive_stream({5}));
}

TEST_CASE("uniform stays strictly inside (0,1)") {
    SeededRng rng(1, 2);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}
