#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cainet/aux_targets.hpp"
#include "cainet/losses.hpp"
#include "cainet/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cainet;

TEST_CASE("enet class weights") {
    std::vector<double> f{0.0, 1.0};
    ClassWeights w = enet_class_weights(f);
    CHECK(w.w[0] == doctest::Approx(1.0L / std::log(1.02L)).epsilon(1e-6));
    CHECK(w.w[0] == doctest::Approx(50.50).epsilon(1e-3));
    CHECK(w.w[1] == doctest::Approx(1.0L / std::log(2.02L)).epsilon(1e-6));
    CHECK(w.w[1] == doctest::Approx(1.4224).epsilon(1e-4));
    std::vector<double> g{0.1, 0.2, 0.3, 0.4};
    ClassWeights wg = enet_class_weights(g);
    for (std::size_t i = 1; i < 4; ++i) CHECK(wg.w[i] < wg.w[i - 1]);
    for (float v : wg.w) CHECK((std::isfinite(v) && v > 0));
    std::vector<double> bad{-0.1, 0.5};
    CHECK_THROWS_AS(enet_class_weights(bad), std::invalid_argument);
    std::vector<double> over{0.7, 0.7};
    CHECK_THROWS_AS(enet_class_weights(over), std::invalid_argument);
}

TEST_CASE("attention loss reference values") {
    std::mt19937_64 rng(1);
    Tensor q = testutil::uniform(rng, {1, 6, 6}, 0.0f, 1.0f);
    CHECK(attention_loss(q, q).item() == doctest::Approx(-1.0).epsilon(1e-6));

    Tensor anti = q.clone();
    double mse = 0;
    for (std::size_t i = 0; i < q.numel(); ++i) {
        anti[i] = 1.0f - q[i];
        mse += std::pow(1.0 - 2.0 * q[i], 2);
    }
    mse /= q.numel();
    CHECK(attention_loss(anti, q).item() == doctest::Approx(mse + 1.0).epsilon(1e-5));

    Tensor c1 = Tensor::full({1, 3, 3}, 0.25f), c2 = Tensor::full({1, 3, 3}, 0.75f);
    CHECK(attention_loss(c1, c2).item() == doctest::Approx(0.25).epsilon(1e-6));
    CHECK_THROWS_AS(attention_loss(c1, Tensor::zeros({1, 3, 2})), DimensionError);
}

TEST_CASE("lovasz grad of short vectors") {
    std::vector<std::uint8_t> one{1};
    CHECK(lovasz_grad(one)[0] == doctest::Approx(1.0));
    std::vector<std::uint8_t> z{0};
    CHECK(lovasz_grad(z)[0] == doctest::Approx(1.0));
    std::vector<std::uint8_t> fb{1, 0};
    auto g = lovasz_grad(fb);
    // J({0}) = 1/1, J({0,1}) = 2/2
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("lovasz softmax hand examples") {
    LabelMap l(1, 1);
    l(0, 0) = 1;
    Tensor half = Tensor::from({2, 1, 1}, {0.5f, 0.5f});
    CHECK(lovasz_softmax_probs(half, l).item() == doctest::Approx(0.5));
    CHECK(lovasz_softmax_probs(half, l, {LovaszClasses::All, false}).item() == doctest::Approx(0.5));
    Tensor exact = Tensor::from({2, 1, 1}, {0.0f, 1.0f});
    CHECK(lovasz_softmax_probs(exact, l).item() == doctest::Approx(0.0));
    Tensor confident = Tensor::from({2, 1, 1}, {-40.0f, 40.0f});
    CHECK(lovasz_softmax(confident, l).item() < 1e-6);
}

TEST_CASE("lovasz softmax agrees with the threshold integral of the Jaccard loss") {
    const std::size_t steps = 11;
    for (bool all : {false, true}) {
        // one pixel, two classes
        for (std::size_t a = 0; a < steps; ++a)
            for (std::int32_t y : {0, 1}) {
                const float p = float(a) / 10.0f;
                Tensor probs = Tensor::from({2, 1, 1}, {1.0f - p, p});
                LabelMap l(1, 1, y);
                const double got = lovasz_softmax_probs(probs, l, {all ? LovaszClasses::All : LovaszClasses::Present}).item();
                CHECK(got == doctest::Approx(oracle::lovasz(probs, l, all)).epsilon(1e-6));
            }
        // two pixels, two classes, all label pairs
        for (std::size_t a = 0; a < steps; ++a)
            for (std::size_t b = 0; b < steps; ++b)
                for (int lab = 0; lab < 4; ++lab) {
                    const float p = float(a) / 10.0f, q = float(b) / 10.0f;
                    Tensor probs = Tensor::from({2, 1, 2}, {1.0f - p, 1.0f - q, p, q});
                    LabelMap l(1, 2);
                    l(0, 0) = lab & 1;
                    l(0, 1) = lab >> 1;
                    const double got =
                        lovasz_softmax_probs(probs, l, {all ? LovaszClasses::All : LovaszClasses::Present}).item();
                    CHECK(got == doctest::Approx(oracle::lovasz(probs, l, all)).epsilon(1e-6));
                }
    }
}

TEST_CASE("lovasz softmax on random three-class patches") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor probs = softmax_axis(testutil::randn(rng, {3, 3, 3}, 2.0f), 0);
        LabelMap l = testutil::random_labels(rng, 3, 3, 3);
        CHECK(lovasz_softmax_probs(probs, l).item() == doctest::Approx(oracle::lovasz(probs, l, false)).epsilon(1e-5));
        CHECK(lovasz_softmax_probs(probs, l).item() >= 0.0f);
    }
}

TEST_CASE("weighted cross entropy by hand") {
    // class 1 logit ln 3 against 0 gives p = 3/4
    Tensor logits = Tensor::from({2, 1, 2}, {0.0f, 0.0f, std::log(3.0f), 0.0f});
    LabelMap l(1, 2);
    l(0, 0) = 1;
    l(0, 1) = 0;
    const double expect = -(std::log(0.75) + std::log(0.5)) / 2;
    CHECK(weighted_cross_entropy(logits, l).item() == doctest::Approx(expect).epsilon(1e-6));
    std::vector<float> w{2.0f, 3.0f};
    CHECK(weighted_cross_entropy(logits, l, w).item() ==
          doctest::Approx(-(3 * std::log(0.75) + 2 * std::log(0.5)) / 2).epsilon(1e-6));
    CHECK(weighted_cross_entropy(logits, l, {}, true).item() == doctest::Approx(-std::log(0.75)).epsilon(1e-6));
    std::vector<float> wrong{1.0f};
    CHECK_THROWS_AS(weighted_cross_entropy(logits, l, wrong), DimensionError);
}

TEST_CASE("weighted binary cross entropy by hand") {
    Tensor pred = Tensor::from({1, 1, 3}, {0.8f, 0.3f, 1.0f});
    BinaryMap t(1, 3);
    t(0, 0) = 1;
    t(0, 1) = 0;
    t(0, 2) = 0;
    const double expect =
        -(2.0 * std::log(0.8) + 0.5 * std::log(0.7) + 0.5 * std::log(double(1e-7f))) / 3.0;
    CHECK(weighted_binary_cross_entropy(pred, t, {0.5f, 2.0f}).item() == doctest::Approx(expect).epsilon(1e-3));
    CHECK_THROWS_AS(weighted_binary_cross_entropy(pred, BinaryMap(1, 2), {1, 1}), DimensionError);
}

TEST_CASE("clamped probabilities carry no gradient") {
    Tensor pred = Tensor::from({1, 1, 2}, {1.0f, 0.5f}, true);
    BinaryMap t(1, 2, 0);
    backward(weighted_binary_cross_entropy(pred, t, {1, 1}));
    CHECK(pred.grad()[0] == 0.0f);
    CHECK(pred.grad()[1] != 0.0f);
}

TEST_CASE("labels outside the class range name the pixel") {
    Tensor logits = Tensor::zeros({3, 2, 2});
    LabelMap l(2, 2, 0);
    l(1, 0) = 3;
    try {
        weighted_cross_entropy(logits, l);
        FAIL("expected LabelRangeError");
    } catch (const LabelRangeError& e) {
        CHECK(std::string(e.what()).find("(1, 0)") != std::string::npos);
    }
    CHECK_THROWS_AS(lovasz_softmax(logits, l), LabelRangeError);
    l(1, 0) = -1;
    CHECK_THROWS_AS(lovasz_softmax(logits, l), LabelRangeError);
    CHECK_THROWS_AS(weighted_cross_entropy(logits, LabelMap(2, 3)), DimensionError);
}

TEST_CASE("total loss is the sum of its components") {
    std::mt19937_64 rng(3);
    LabelMap l = testutil::random_labels(rng, 8, 8, 3);
    AuxTargets aux = make_aux_targets(l);
    StreamOutputs o;
    o.p1 = testutil::randn(rng, {3, 2, 2});
    o.p2 = testutil::randn(rng, {3, 4, 4});
    o.p3 = testutil::randn(rng, {3, 8, 8});
    o.p4 = testutil::randn(rng, {3, 8, 8});
    o.att1 = testutil::uniform(rng, {1, 2, 2}, 0.1f, 0.9f);
    o.att2 = testutil::uniform(rng, {1, 4, 4}, 0.1f, 0.9f);
    o.binary_map = testutil::uniform(rng, {1, 8, 8}, 0.1f, 0.9f);
    o.boundary_map = testutil::uniform(rng, {1, 8, 8}, 0.1f, 0.9f);
    o.s_rgb = testutil::randn(rng, {3, 8, 8});
    o.s_thermal = testutil::randn(rng, {3, 8, 8});
    o.s_global = testutil::randn(rng, {3, 8, 8});
    LossWeights w;
    w.seg.w = {1.0f, 2.0f, 3.0f};
    LossResult r = total_loss(o, l, aux, w);
    const LossReport& rep = r.report;
    CHECK(rep.l_target == doctest::Approx(rep.l_seg1 + rep.l_seg2 + rep.l_seg3 + rep.l_seg4));
    CHECK(rep.l_total == doctest::Approx(rep.l_target + rep.l_att1 + rep.l_att2 + rep.l_binary + rep.l_boundary +
                                         rep.l_decoder));
    CHECK(r.total.item() == doctest::Approx(rep.l_total).epsilon(1e-5));
    CHECK(rep.l_seg4 == doctest::Approx(weighted_cross_entropy(o.p4, l, w.seg.w).item()).epsilon(1e-5));

    LossToggles off;
    off.attention = off.binary = off.boundary = off.decoder = false;
    LossResult t = total_loss(o, l, aux, w, off);
    CHECK(t.report.l_total == doctest::Approx(rep.l_target));
    CHECK(t.report.l_att1 == 0.0);

    const std::string line = rep.log_fields();
    std::size_t pos = 0;
    for (const char* key : {"l_total=", "l_target=", "l_att1=", "l_att2=", "l_binary=", "l_boundary=", "l_decoder="}) {
        const std::size_t at = line.find(key, pos);
        REQUIRE(at != std::string::npos);
        pos = at;
    }
    Tape::current().clear();
}

TEST_CASE("stage-only heads produce only decoder terms") {
    std::mt19937_64 rng(4);
    LabelMap l = testutil::random_labels(rng, 4, 4, 2);
    StreamOutputs o;
    o.s_rgb = testutil::randn(rng, {2, 4, 4});
    LossResult r = total_loss(o, l, make_aux_targets(l), {});
    CHECK(r.report.l_target == 0.0);
    CHECK(r.report.l_decoder == doctest::Approx(weighted_cross_entropy(o.s_rgb, l).item()));
}
