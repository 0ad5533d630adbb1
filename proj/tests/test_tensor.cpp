#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace bnnkit;

namespace {

// independent triple-loop oracle
template <class T>
TensorT<T> matmul_naive(const TensorT<T>& a, const TensorT<T>& b) {
    int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    TensorT<T> c({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T acc{0};
            for (int64_t l = 0; l < k; ++l) acc += a.at2(i, l) * b.at2(l, j);
            c.at2(i, j) = acc;
        }
    return c;
}

// independent nested-loop cross-correlation oracle (valid/same padding)
template <class T>
TensorT<T> conv2d_naive(const TensorT<T>& x, const TensorT<T>& k, int64_t stride,
                        Padding padding) {
    Conv2dGeom g = conv2d_geometry(x.shape, k.shape, stride, padding);
    TensorT<T> y({g.batch, g.out_h, g.out_w, g.out_c});
    for (int64_t b = 0; b < g.batch; ++b)
        for (int64_t oh = 0; oh < g.out_h; ++oh)
            for (int64_t ow = 0; ow < g.out_w; ++ow)
                for (int64_t co = 0; co < g.out_c; ++co) {
                    T acc{0};
                    for (int64_t dh = 0; dh < g.kh; ++dh)
                        for (int64_t dw = 0; dw < g.kw; ++dw)
                            for (int64_t ci = 0; ci < g.in_c; ++ci) {
                                int64_t ih = oh * g.stride - g.pad_top + dh;
                                int64_t iw = ow * g.stride - g.pad_left + dw;
                                if (ih < 0 || ih >= g.in_h || iw < 0 || iw >= g.in_w) continue;
                                acc += x.at4(b, ih, iw, ci) *
                                       k.data[static_cast<size_t>(((dh * g.kw + dw) * g.in_c + ci) * g.out_c + co)];
                            }
                    y.at4(b, oh, ow, co) = acc;
                }
    return y;
}

template <class T>
void check_close(const TensorT<T>& got, const TensorT<T>& want, double rel) {
    REQUIRE(got.shape == want.shape);
    for (int64_t i = 0; i < got.size(); ++i) {
        double g = got.data[static_cast<size_t>(i)], w = want.data[static_cast<size_t>(i)];
        double denom = std::max(1.0, std::abs(w));
        CHECK(std::abs(g - w) / denom <= rel);
    }
}

template <class T>
TensorT<T> random_tensor(std::vector<int64_t> shape, uint64_t stream) {
    SeededRng rng(99, stream);
    return sample_normal<T>(rng, std::move(shape));
}

} // namespace

TEST_CASE("matmul identity and hand expansion") {
    Tensor i2({2, 2}, {1, 0, 0, 1});
    Tensor a({2, 2}, {1, 2, 3, 4});
    check_close(matmul(i2, a), a, 0.0);

    Tensor row({1, 2}, {1, 2});
    Tensor col({2, 1}, {3, 4});
    Tensor prod = matmul(row, col);
    REQUIRE(prod.shape == std::vector<int64_t>{1, 1});
    CHECK(prod.data[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul matches triple-loop oracle") {
    auto a = random_tensor<float>({7, 5}, 1);
    auto b = random_tensor<float>({5, 3}, 2);
    check_close(matmul(a, b), matmul_naive(a, b), 1e-6);

    auto a64 = random_tensor<double>({7, 5}, 1);
    auto b64 = random_tensor<double>({5, 3}, 2);
    check_close(matmul(a64, b64), matmul_naive(a64, b64), 1e-12);
}

TEST_CASE("matmul transposed variants match oracle") {
    auto a = random_tensor<double>({6, 4}, 3);
    auto b = random_tensor<double>({6, 5}, 4);
    // a^T * b
    TensorT<double> at({4, 6});
    for (int64_t i = 0; i < 6; ++i)
        for (int64_t j = 0; j < 4; ++j) at.at2(j, i) = a.at2(i, j);
    check_close(matmul_tn(a, b), matmul_naive(at, b), 1e-12);
    // a * b^T
    auto c = random_tensor<double>({5, 4}, 5);
    TensorT<double> ct({4, 5});
    for (int64_t i = 0; i < 5; ++i)
        for (int64_t j = 0; j < 4; ++j) ct.at2(j, i) = c.at2(i, j);
    check_close(matmul_nt(a, c), matmul_naive(a, ct), 1e-12);
}

TEST_CASE("matmul rejects shape mismatch naming both shapes") {
    Tensor a({2, 3});
    Tensor b({4, 2});
    try {
        matmul(a, b);
        FAIL("expected dimension error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Dimension);
        CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
        CHECK(std::string(e.what()).find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("conv2d hand cases") {
    // 3x3 ones, 2x2 ones kernel, valid -> 2x2 of fours
    Tensor x = Tensor::full({1, 3, 3, 1}, 1.0f);
    Tensor k = Tensor::full({2, 2, 1, 1}, 1.0f);
    Tensor y = conv2d(x, k, 1, Padding::Valid);
    REQUIRE(y.shape == std::vector<int64_t>{1, 2, 2, 1});
    for (float v : y.data) CHECK(v == doctest::Approx(4.0));

    // 1x1 identity kernel leaves input unchanged
    auto xr = random_tensor<float>({2, 4, 5, 3}, 7);
    Tensor id({1, 1, 3, 3});
    for (int64_t c = 0; c < 3; ++c) id.data[static_cast<size_t>(c * 3 + c)] = 1.0f;
    check_close(conv2d(xr, id, 1, Padding::Valid), xr, 1e-6);
}

TEST_CASE("conv2d matches nested-loop oracle") {
    auto x = random_tensor<float>({2, 6, 6, 3}, 11);
    auto k = random_tensor<float>({3, 3, 3, 4}, 12);
    for (auto pad : {Padding::Valid, Padding::Same})
        for (int64_t stride : {1, 2})
            check_close(conv2d(x, k, stride, pad), conv2d_naive(x, k, stride, pad), 1e-5);

    auto x64 = random_tensor<double>({2, 6, 6, 3}, 11);
    auto k64 = random_tensor<double>({3, 3, 3, 4}, 12);
    check_close(conv2d(x64, k64, 1, Padding::Valid), conv2d_naive(x64, k64, 1, Padding::Valid),
                1e-12);
}

TEST_CASE("conv2d rejects oversized kernel") {
    Tensor x({1, 3, 3, 1});
    Tensor k({4, 4, 1, 1});
    CHECK_THROWS_AS(conv2d(x, k, 1, Padding::Valid), Error);
}

TEST_CASE("conv2d gradients match finite differences of the oracle") {
    auto x = random_tensor<double>({2, 5, 5, 2}, 21);
    auto k = random_tensor<double>({3, 3, 2, 3}, 22);
    Conv2dGeom g = conv2d_geometry(x.shape, k.shape, 2, Padding::Valid);
    auto gy = random_tensor<double>({g.batch, g.out_h, g.out_w, g.out_c}, 23);

    // scalar objective: sum(conv(x,k) * gy)
    auto objective = [&](const TensorT<double>& xx, const TensorT<double>& kk) {
        auto y = conv2d_naive(xx, kk, 2, Padding::Valid);
        double s = 0;
        for (int64_t i = 0; i < y.size(); ++i) s += y.data[static_cast<size_t>(i)] * gy.data[static_cast<size_t>(i)];
        return s;
    };
    auto dx = conv2d_backward_input(gy, k, g);
    auto dk = conv2d_backward_kernel(x, gy, g);
    const double h = 1e-6;
    for (int64_t i = 0; i < x.size(); i += 7) {
        auto xp = x, xm = x;
        xp.data[static_cast<size_t>(i)] += h;
        xm.data[static_cast<size_t>(i)] -= h;
        double fd = (objective(xp, k) - objective(xm, k)) / (2 * h);
        CHECK(dx.data[static_cast<size_t>(i)] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (int64_t i = 0; i < k.size(); i += 5) {
        auto kp = k, km = k;
        kp.data[static_cast<size_t>(i)] += h;
        km.data[static_cast<size_t>(i)] -= h;
        double fd = (objective(x, kp) - objective(x, km)) / (2 * h);
        CHECK(dk.data[static_cast<size_t>(i)] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("maxpool on a ramp") {
    Tensor x({1, 4, 4, 1});
    for (int64_t i = 0; i < 16; ++i) x.data[static_cast<size_t>(i)] = static_cast<float>(i);
    Tensor y = maxpool2d(x, 2, 2);
    REQUIRE(y.shape == std::vector<int64_t>{1, 2, 2, 1});
    CHECK(y.data[0] == 5.0f);
    CHECK(y.data[1] == 7.0f);
    CHECK(y.data[2] == 13.0f);
    CHECK(y.data[3] == 15.0f);
}

TEST_CASE("maxpool backward routes gradient to the argmax") {
    Tensor x({1, 2, 2, 1}, {3, 1, 2, 9});
    std::vector<int64_t> argmax;
    Tensor y = maxpool2d(x, 2, 2, &argmax);
    CHECK(y.data[0] == 9.0f);
    Tensor gy({1, 1, 1, 1}, {5.0f});
    Tensor dx = maxpool2d_backward(gy, argmax, x.shape);
    CHECK(dx.data[3] == 5.0f);
    CHECK(dx.data[0] + dx.data[1] + dx.data[2] == 0.0f);
}

TEST_CASE("softmax symmetry and normalization") {
    Tensor x({1, 2}, {0, 0});
    Tensor y = softmax(x);
    CHECK(y.data[0] == doctest::Approx(0.5));
    CHECK(y.data[1] == doctest::Approx(0.5));

    auto r = random_tensor<float>({4, 10}, 31);
    auto s = softmax(r);
    for (int64_t n = 0; n < 4; ++n) {
        double sum = 0;
        for (int64_t j = 0; j < 10; ++j) sum += s.at2(n, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("softplus analytic value and large-argument stability") {
    Tensor x({3}, {0.0f, 100.0f, -100.0f});
    Tensor y = softplus(x);
    CHECK(y.data[0] == doctest::Approx(std::log(2.0)));
    CHECK(y.data[1] == doctest::Approx(100.0));
    CHECK(y.data[2] == doctest::Approx(0.0).epsilon(1e-30));
}

TEST_CASE("elementwise ops reject shape mismatches") {
    Tensor a({2, 2});
    Tensor b({4});
    CHECK_THROWS_AS(add(a, b), Error);
    CHECK_THROWS_AS(mul(a, b), Error);
}
