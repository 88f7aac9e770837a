#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cainet/aux_targets.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cainet;

namespace {

bool subset(const BinaryMap& a, const BinaryMap& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.values[i] && !b.values[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("binary target") {
    LabelMap l(2, 2);
    l.values = {0, 3, 7, 0};
    BinaryMap b = binary_target(l);
    CHECK(b.values == std::vector<std::uint8_t>{0, 1, 1, 0});
    CHECK(binary_target(LabelMap(3, 3)).values == std::vector<std::uint8_t>(9, 0));
    LabelMap again(2, 2);
    again.values.assign(b.values.begin(), b.values.end());
    CHECK(binary_target(again) == b);
}

TEST_CASE("dilate and erode examples") {
    BinaryMap c(5, 5);
    c(2, 2) = 1;
    BinaryMap d = dilate(c, 3);
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 5; ++x) CHECK(d(y, x) == (y >= 1 && y <= 3 && x >= 1 && x <= 3));
    BinaryMap ones(3, 3, 1);
    BinaryMap e = erode(ones, 3);
    CHECK(e.values == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 0, 0, 0, 0});
    CHECK_THROWS_AS(dilate(c, 4), ConfigError);
    CHECK_THROWS_AS(erode(c, 2), ConfigError);
}

TEST_CASE("morphology matches brute force and closing grows") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t h = 1 + rng() % 9, w = 1 + rng() % 9, k = 2 * (rng() % 3) + 1;
        BinaryMap b = testutil::random_binary(rng, h, w, 0.4);
        CHECK(dilate(b, k) == oracle::morph(b, k, true));
        CHECK(erode(b, k) == oracle::morph(b, k, false));
        // Zero padding erodes the outer ring, so closing only grows away from it.
        BinaryMap inner(h + 2, w + 2);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) inner(y + 1, x + 1) = b(y, x);
        CHECK(subset(inner, erode(dilate(inner, 3), 3)));
    }
}

TEST_CASE("boundary target examples") {
    CHECK(boundary_target(BinaryMap(4, 4)).values == std::vector<std::uint8_t>(16, 0));
    BinaryMap ring = boundary_target(BinaryMap(3, 3, 1));
    CHECK(ring.values == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 1, 1, 1, 1});
    BinaryMap single(5, 5);
    single(1, 3) = 1;
    CHECK(boundary_target(single) == single);
}

TEST_CASE("gaussian blur properties") {
    FloatMap c(9, 7, 0.4f);
    FloatMap bc = gaussian_blur(c, 2.0);
    for (float v : bc.values) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));

    auto k = gaussian_kernel(2.0);
    CHECK(k.size() == 13);
    double ks = 0;
    for (double v : k) ks += v;
    CHECK(ks == doctest::Approx(1.0).epsilon(1e-12));

    FloatMap impulse(31, 31);
    impulse(15, 15) = 1.0f;
    double mass = 0;
    for (float v : gaussian_blur(impulse, 2.0).values) mass += v;
    CHECK(std::abs(mass - 1.0) < 1e-4);
    CHECK_THROWS_AS(gaussian_blur(impulse, 0.0), ConfigError);
}

TEST_CASE("wider blur never raises the maximum") {
    std::mt19937_64 rng(6);
    FloatMap m(12, 10);
    std::uniform_real_distribution<float> u(0, 1);
    for (float& v : m.values) v = u(rng) * u(rng);
    float prev = *std::max_element(m.values.begin(), m.values.end());
    for (double s : {0.5, 1.0, 2.0, 4.0}) {
        FloatMap b = gaussian_blur(m, s);
        const float mx = *std::max_element(b.values.begin(), b.values.end());
        CHECK(mx <= prev + 1e-6f);
        prev = mx;
    }
}

TEST_CASE("aux targets invariants on random labels") {
    std::mt19937_64 rng(7);
    const std::size_t before = aux_target_count();
    for (int rep = 0; rep < 10; ++rep) {
        LabelMap l = testutil::random_labels(rng, 16, 12, 4);
        for (auto& v : l.values)
            if (rng() % 3) v = 0;
        AuxTargets a = make_aux_targets(l);
        for (std::size_t i = 0; i < l.size(); ++i) CHECK(bool(a.binary.values[i]) == (l.values[i] != 0));
        CHECK(subset(a.boundary, a.binary));
        CHECK(subset(a.boundary, dilate(a.binary, 5)));
        for (float v : a.attention_q.values) CHECK((v >= 0.0f && v <= 1.0f));
    }
    CHECK(aux_target_count() == before + 10);
}

TEST_CASE("attention target covers objects") {
    BinaryMap b(20, 20);
    for (std::size_t y = 8; y < 12; ++y)
        for (std::size_t x = 8; x < 12; ++x) b(y, x) = 1;
    FloatMap q = attention_target(b);
    CHECK(q(10, 10) > q(2, 2));
    CHECK(q(10, 10) > 0.5f);
}
