#include <doctest.h>

#include <cmath>

#include "cainet/gradcheck.hpp"
#include "cainet/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cainet;
using testutil::max_abs_diff;
using testutil::randn;

TEST_CASE("tape replays adjoints in reverse and clears") {
    Tensor x = Tensor::from({2}, {1.5f, -2.0f}, true);
    Tensor y = mul(x, x);
    Tensor loss = sum(y);
    CHECK(Tape::current().size() == 2);
    backward(loss);
    CHECK(Tape::current().empty());
    CHECK(x.grad()[0] == doctest::Approx(3.0));
    CHECK(x.grad()[1] == doctest::Approx(-4.0));
}

TEST_CASE("backward rejects non-scalar losses") {
    Tensor x = Tensor::from({2}, {1.0f, 2.0f}, true);
    Tensor y = scale(x, 2.0f);
    CHECK_THROWS_AS(backward(y), DimensionError);
    Tape::current().clear();
}

TEST_CASE("no-grad guard records nothing") {
    Tensor x = Tensor::from({3}, {1, 2, 3}, true);
    {
        NoGradGuard g;
        Tensor y = relu(x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(Tape::current().empty());
}

TEST_CASE("gradients accumulate over shared inputs") {
    Tensor x = Tensor::from({1}, {2.0f}, true);
    backward(sum(add(mul(x, x), scale(x, 3.0f))));
    CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("matmul matches the triple loop") {
    std::mt19937_64 rng(3);
    for (auto [p, q, r] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 2}, {17, 9, 13}, {64, 33, 7}}) {
        Tensor a = randn(rng, {p, q}), b = randn(rng, {q, r});
        CHECK(max_abs_diff(matmul(a, b), oracle::matmul(a, b)) < 1e-6);
    }
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("conv2d matches the sliding window") {
    std::mt19937_64 rng(5);
    struct Case { std::size_t cin, cout, h, w, k, stride; int pad; };
    for (Case c : {Case{1, 1, 5, 5, 3, 1, 1}, Case{3, 4, 7, 6, 3, 2, 1}, Case{2, 3, 8, 8, 1, 1, 0},
                   Case{4, 2, 9, 9, 5, 1, 2}, Case{2, 2, 6, 6, 7, 1, 3}, Case{3, 5, 6, 6, 1, 2, 0}}) {
        Tensor x = randn(rng, {c.cin, c.h, c.w}), w = randn(rng, {c.cout, c.cin, c.k, c.k}), b = randn(rng, {c.cout});
        Tensor got = conv2d(x, w, b, {c.stride, c.pad});
        CHECK(max_abs_diff(got, oracle::conv(x, w, b, c.stride, std::size_t(c.pad))) < 1e-6);
    }
}

TEST_CASE("depthwise conv is a per-channel conv") {
    std::mt19937_64 rng(6);
    Tensor x = randn(rng, {3, 6, 5}), w = randn(rng, {3, 1, 3, 3});
    Tensor got = depthwise_conv2d(x, w);
    for (std::size_t c = 0; c < 3; ++c) {
        Tensor xc = Tensor::zeros({1, 6, 5}), wc = Tensor::zeros({1, 1, 3, 3});
        for (std::size_t i = 0; i < 30; ++i) xc[i] = x[c * 30 + i];
        for (std::size_t i = 0; i < 9; ++i) wc[i] = w[c * 9 + i];
        Tensor ref = oracle::conv(xc, wc, {}, 1, 1);
        for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(got[c * 30 + i] - ref[i]) < 1e-6);
    }
}

TEST_CASE("depthwise separable parameter count") {
    CHECK(depthwise_separable_param_count(16, 3, 8) == 16 * 9 + 16 * 8);
}

TEST_CASE("even or non-square kernels are rejected") {
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 2, 2})), ConfigError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 3, 1})), ConfigError);
}

TEST_CASE("conv output extent formula") {
    CHECK(conv_out_extent(32, 3, 2, 1) == 16);
    CHECK(conv_out_extent(7, 3, 1, 1) == 7);
    CHECK(conv_out_extent(5, 5, 1, 0) == 1);
}

TEST_CASE("softmax sums to one and matches a long-double reference") {
    std::mt19937_64 rng(8);
    Tensor x = randn(rng, {4, 7}, 5.0f);
    for (std::size_t axis : {0u, 1u}) {
        Tensor s = softmax_axis(x, axis);
        const std::size_t outer = axis == 0 ? 7 : 4, len = axis == 0 ? 4 : 7;
        for (std::size_t o = 0; o < outer; ++o) {
            long double z = 0, total = 0;
            auto at = [&](std::size_t i) { return axis == 0 ? i * 7 + o : o * 7 + i; };
            for (std::size_t i = 0; i < len; ++i) z += std::exp((long double)x[at(i)]);
            for (std::size_t i = 0; i < len; ++i) {
                CHECK(std::abs(double(s[at(i)] - std::exp((long double)x[at(i)]) / z)) < 1e-6);
                total += s[at(i)];
            }
            CHECK(std::abs(double(total) - 1.0) < 1e-6);
        }
    }
    Tensor big = Tensor::from({1, 3}, {1000.0f, 1001.0f, 999.0f});
    Tensor sb = softmax_axis(big, 1);
    CHECK(std::isfinite(sb[0]));
    CHECK(std::abs(sb[0] + sb[1] + sb[2] - 1.0f) < 1e-6);
}

TEST_CASE("bilinear resize agrees with a hand computation") {
    Tensor x = Tensor::from({1, 2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
    Tensor y = bilinear_resize(x, 4, 4);
    // align_corners=false: source coordinate (i + 0.5) / 2 - 0.5, clamped at 0.
    auto ref = [&](double sy, double sx) {
        sy = std::max(sy, 0.0);
        sx = std::max(sx, 0.0);
        const double y0 = std::min(std::floor(sy), 1.0), x0 = std::min(std::floor(sx), 1.0);
        const double y1 = std::min(y0 + 1, 1.0), x1 = std::min(x0 + 1, 1.0);
        const double fy = sy - y0, fx = sx - x0;
        auto v = [&](double r, double c) { return double(x[std::size_t(r) * 2 + std::size_t(c)]); };
        return (1 - fy) * ((1 - fx) * v(y0, x0) + fx * v(y0, x1)) + fy * ((1 - fx) * v(y1, x0) + fx * v(y1, x1));
    };
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(y.at({0, i, j}) == doctest::Approx(ref((i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5)));
    CHECK(y.at({0, 0, 0}) == doctest::Approx(0.0));
    CHECK(y.at({0, 3, 3}) == doctest::Approx(3.0));
    CHECK(y.at({0, 1, 1}) == doctest::Approx(0.75));
}

TEST_CASE("bilinear resize to the same extent is the identity") {
    std::mt19937_64 rng(9);
    Tensor x = randn(rng, {2, 3, 5});
    CHECK(max_abs_diff(bilinear_resize(x, 3, 5), x) == 0.0);
}

TEST_CASE("concat, channel max and pooling") {
    Tensor a = Tensor::from({1, 1, 2}, {1, 5}), b = Tensor::from({2, 1, 2}, {3, 2, -1, 7});
    Tensor c = concat_channels({a, b});
    CHECK(c.shape() == Shape{3, 1, 2});
    CHECK(c[4] == -1.0f);
    Tensor m = channel_max(c);
    CHECK(m[0] == 3.0f);
    CHECK(m[1] == 7.0f);
    Tensor p = global_avg_pool(b);
    CHECK(p[0] == doctest::Approx(2.5));
    CHECK(p[1] == doctest::Approx(3.0));
}

TEST_CASE("primitive gradients agree with central differences") {
    std::mt19937_64 rng(11);
    Tensor x = randn(rng, {3, 5, 4});
    Tensor w = randn(rng, {2, 3, 3, 3});
    Tensor r = randn(rng, {2, 3, 2});
    x.impl()->requires_grad = true;
    w.impl()->requires_grad = true;
    auto f = [&] { return weighted_sum(bilinear_resize(sigmoid(conv2d(x, w, {}, {2, 1})), 3, 2), r); };
    backward(f());
    for (Tensor t : {x, w}) {
        Tensor num = finite_difference_gradient([&] { return double(f().item()); }, t, 1e-2);
        CHECK(relative_error(t.grad(), num.data()) < 1e-3);
    }
}

TEST_CASE("relative error is scale-normalized") {
    std::vector<float> a{1.0f, 0.0f}, n{1.0f, 0.001f};
    CHECK(relative_error(a, n) == doctest::Approx(0.001));
    std::vector<float> z{0.0f, 0.0f};
    CHECK(relative_error(z, z) == 0.0);
}
