#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cainet/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cainet;

namespace {

ConfusionMatrix from_counts(std::size_t k, const std::vector<int>& counts) {
    ConfusionMatrix cm(k);
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t p = 0; p < k; ++p) {
            const int n = counts[t * k + p];
            if (!n) continue;
            LabelMap truth(1, n, std::int32_t(t)), pred(1, n, std::int32_t(p));
            cm.accumulate(pred, truth);
        }
    return cm;
}

}  // namespace

TEST_CASE("hand examples") {
    ConfusionMatrix cm = from_counts(2, {2, 1, 0, 1});
    CHECK(macc(cm) == doctest::Approx(5.0 / 6.0));
    CHECK(miou(cm) == doctest::Approx(7.0 / 12.0));
    CHECK(cm.total() == 4);
    CHECK(cm.row_sum(0) == 3);
    CHECK(cm.col_sum(0) == 2);
}

TEST_CASE("perfect prediction and accumulation basics") {
    ConfusionMatrix cm(3);
    LabelMap l(2, 5, 2);
    cm.accumulate(l, l);
    CHECK(cm(2, 2) == 10);
    CHECK(cm.total() == 10);
    CHECK(macc(cm) == 1.0);
    CHECK(miou(cm) == 1.0);
    ConfusionMatrix before = cm;
    cm.accumulate(LabelMap(0, 0), LabelMap(0, 0));
    CHECK(cm == before);
    CHECK_THROWS_AS(cm.accumulate(LabelMap(2, 2), LabelMap(2, 3)), DimensionError);
    LabelMap bad(1, 1, 3);
    CHECK_THROWS_AS(cm.accumulate(bad, LabelMap(1, 1)), std::out_of_range);
}

TEST_CASE("zero-denominator classes") {
    ConfusionMatrix cm = from_counts(3, {2, 1, 0, 0, 1, 0, 0, 0, 0});
    auto acc = class_accuracy(cm);
    CHECK(std::isnan(acc[2]));
    CHECK(macc(cm) == doctest::Approx((2.0 / 3 + 1.0) / 2));
    CHECK(macc(cm, {ZeroClass::Zero, true}) == doctest::Approx((2.0 / 3 + 1.0) / 3));
    CHECK(miou(cm, {ZeroClass::Skip, false}) == doctest::Approx(0.5));
}

TEST_CASE("mean metrics match a set-based oracle exactly") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 25; ++rep) {
        LabelMap t = testutil::random_labels(rng, 8, 8, 4), p = testutil::random_labels(rng, 8, 8, 4);
        ConfusionMatrix cm(4);
        cm.accumulate(p, t);
        const oracle::SetMetrics ref = oracle::set_metrics(t, p, 4);
        CHECK(miou(cm) == ref.miou);
        CHECK(macc(cm) == ref.macc);
    }
}

TEST_CASE("merge is additive, associative and commutative") {
    std::mt19937_64 rng(22);
    std::array<LabelMap, 3> ts, ps;
    std::array<ConfusionMatrix, 3> parts{ConfusionMatrix(3), ConfusionMatrix(3), ConfusionMatrix(3)};
    ConfusionMatrix all(3);
    for (int i = 0; i < 3; ++i) {
        ts[i] = testutil::random_labels(rng, 5, 6, 3);
        ps[i] = testutil::random_labels(rng, 5, 6, 3);
        parts[i].accumulate(ps[i], ts[i]);
        all.accumulate(ps[i], ts[i]);
    }
    ConfusionMatrix ab = parts[0];
    ab.merge(parts[1]);
    ab.merge(parts[2]);
    ConfusionMatrix bc = parts[1];
    bc.merge(parts[2]);
    bc.merge(parts[0]);
    CHECK(ab == all);
    CHECK(bc == all);
    CHECK(all.total() == 90);
    CHECK_THROWS_AS(all.merge(ConfusionMatrix(4)), DimensionError);
}

TEST_CASE("pixel order does not matter") {
    std::mt19937_64 rng(23);
    LabelMap t = testutil::random_labels(rng, 6, 6, 3), p = testutil::random_labels(rng, 6, 6, 3);
    std::vector<std::size_t> perm(36);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LabelMap t2 = t, p2 = p;
    for (std::size_t i = 0; i < 36; ++i) {
        t2.values[i] = t.values[perm[i]];
        p2.values[i] = p.values[perm[i]];
    }
    ConfusionMatrix a(3), b(3);
    a.accumulate(p, t);
    b.accumulate(p2, t2);
    CHECK(miou(a) == miou(b));
    CHECK(macc(a) == macc(b));
}

TEST_CASE("report has a table and key=value lines") {
    ConfusionMatrix cm = from_counts(2, {2, 1, 0, 1});
    std::string r = metrics_report(cm, {"unlabeled", "car"});
    CHECK(r.find("iou.car=") != std::string::npos);
    CHECK(r.find("acc.unlabeled=") != std::string::npos);
    CHECK(r.find("miou=0.58333") != std::string::npos);
    CHECK(r.find("pixels=4") != std::string::npos);
}
