#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "cainet/arlm.hpp"
#include "cainet/backbone.hpp"
#include "cainet/cacr.hpp"
#include "cainet/detail_aggregation.hpp"
#include "cainet/gcm.hpp"
#include "cainet/gradcheck.hpp"
#include "cainet/losses.hpp"
#include "cainet/ops.hpp"

namespace cainet {

namespace {

constexpr double kSmoothEps = 1e-2;
constexpr double kPiecewiseEps = 3e-3;

Tensor randn(std::mt19937_64& rng, Shape shape, double stddev = 1.0) {
    std::normal_distribution<float> n(0.0f, static_cast<float>(stddev));
    Tensor t = Tensor::zeros(std::move(shape));
    for (float& v : t.data()) v = n(rng);
    return t;
}

Tensor uniform(std::mt19937_64& rng, Shape shape, float lo, float hi) {
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (float& v : t.data()) v = u(rng);
    return t;
}

LabelMap random_labels(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t k) {
    LabelMap l(h, w);
    for (auto& v : l.values) v = static_cast<std::int32_t>(rng() % k);
    return l;
}

std::vector<Tensor> all_params(ParameterStore& store) {
    std::vector<Tensor> out;
    for (auto& [name, p] : store.all()) out.push_back(p.tensor);
    return out;
}

std::vector<Tensor> join(std::vector<Tensor> a, std::initializer_list<Tensor> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

double check_gradients(const std::function<std::vector<Tensor>()>& outputs, const std::vector<Tensor>& wrt,
                       double eps, std::uint64_t seed) {
    for (const Tensor& t : wrt) {
        t.impl()->requires_grad = true;
        t.impl()->grad.assign(t.numel(), 0.0f);
    }
    std::vector<Tensor> outs = outputs();
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<Tensor> weights;
    for (const Tensor& o : outs)
        weights.push_back(o.numel() == 1 ? Tensor::full(o.shape(), 1.0f) : uniform(rng, o.shape(), -1.0f, 1.0f));

    Tensor total = weighted_sum(outs[0], weights[0]);
    for (std::size_t i = 1; i < outs.size(); ++i) total = add(total, weighted_sum(outs[i], weights[i]));
    backward(total);

    auto value = [&] {
        const std::vector<Tensor> o = outputs();
        double f = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i)
            for (std::size_t j = 0; j < o[i].numel(); ++j) f += double(weights[i][j]) * o[i][j];
        return f;
    };
    // Per coordinate, the numeric derivative is the candidate closest to the
    // analytic one among central and one-sided differences at three step sizes.
    // A ReLU or sort kink inside one stencil leaves the others intact; a wrong
    // adjoint disagrees with all of them.
    NoGradGuard guard;
    std::vector<float> all_analytic, all_numeric;
    for (const Tensor& t : wrt) {
        const std::vector<float> analytic(t.impl()->grad.begin(), t.impl()->grad.end());
        std::vector<float> numeric(analytic.size());
        auto x = t.impl()->data.data();
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const float saved = x[i];
            const double f0 = value();
            double best = std::numeric_limits<double>::infinity();
            for (double step : {eps, eps / 4, eps / 16}) {
                const float hi = static_cast<float>(saved + step), lo = static_cast<float>(saved - step);
                x[i] = hi;
                const double fp = value();
                x[i] = lo;
                const double fm = value();
                x[i] = saved;
                for (double cand : {(fp - fm) / (double(hi) - lo), (fp - f0) / (double(hi) - saved),
                                    (f0 - fm) / (double(saved) - lo)}) {
                    if (std::abs(cand - analytic[i]) < std::abs(best - analytic[i])) best = cand;
                }
            }
            numeric[i] = static_cast<float>(best);
        }
        all_analytic.insert(all_analytic.end(), analytic.begin(), analytic.end());
        all_numeric.insert(all_numeric.end(), numeric.begin(), numeric.end());
    }
    // One scale for the whole composite: a tiny scalar gradient (a bias feeding
    // a sigmoid, say) would otherwise be judged against its own noise floor.
    return relative_error(all_analytic, all_numeric);
}

std::vector<GradcheckCase> module_gradchecks() {
    std::vector<GradcheckCase> cases;

    cases.push_back({"backbone", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        BackboneConfig cfg;
        cfg.preset = "gradcheck";
        cfg.stem_channels = 4;
        cfg.stages = {{{{{1, 4, 1}}, 1}, {{{2, 6, 1}}, 2}, {{{2, 6, 1}}, 2}, {{{2, 8, 1}}, 4}, {{{2, 8, 1}}, 4}}};
        cfg.num_classes = 3;
        ParameterStore store(seed);
        Encoder enc(store, "enc", cfg, 2, Modality::Rgb);
        for (auto& [name, p] : store.all())
            if (name.find("bias") != std::string::npos)
                for (float& v : p.tensor.data()) v = std::uniform_real_distribution<float>(-0.2f, 0.2f)(rng);
        Tensor x = uniform(rng, {2, 8, 8}, 0.0f, 1.0f);
        return check_gradients(
            [&] {
                FeaturePyramid f = enc.encode(x);
                return std::vector<Tensor>{f[1], f[4], f[5]};
            },
            join(all_params(store), {x}), kPiecewiseEps, seed);
    }});

    cases.push_back({"coarse_decoder", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        ParameterStore store(seed);
        CoarseDecoder dec(store, "dec", 6, 5, 3);
        Tensor x = randn(rng, {6, 3, 3});
        return check_gradients([&] { return std::vector<Tensor>{dec.forward(x, 6, 6)}; },
                               join(all_params(store), {x}), kPiecewiseEps, seed);
    }});

    cases.push_back({"cacr", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        ParameterStore store(seed);
        CacrParams p = CacrParams::create(store, "cacr", 8);
        Tensor fr = randn(rng, {8, 4, 4}), ft = randn(rng, {8, 4, 4});
        return check_gradients([&] { return std::vector<Tensor>{cacr_forward(fr, ft, p)}; },
                               join(all_params(store), {fr, ft}), kPiecewiseEps, seed);
    }});

    cases.push_back({"gcm", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        ParameterStore store(seed);
        GcmParams p = GcmParams::create(store, "gcm", 12, 4);
        Tensor cr3 = randn(rng, {4, 8, 8}, 0.5), cr4 = randn(rng, {4, 4, 4}, 0.5), cr5 = randn(rng, {4, 4, 4}, 0.5);
        return check_gradients([&] { return std::vector<Tensor>{gcm_forward(cr3, cr4, cr5, p)}; },
                               join(all_params(store), {cr3, cr4, cr5}), kSmoothEps, seed);
    }});

    cases.push_back({"detail_aggregation", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        ParameterStore store(seed);
        DaParams p = DaParams::create(store, "da", 8, 4);
        Tensor fr = randn(rng, {8, 6, 6}), ft = randn(rng, {8, 6, 6});
        return check_gradients([&] { return std::vector<Tensor>{da_forward(fr, ft, p)}; },
                               join(all_params(store), {fr, ft}), kPiecewiseEps, seed);
    }});

    cases.push_back({"arlm_stage", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        ParameterStore store(seed);
        ArlmStageParams p = ArlmStageParams::create(store, "arlm", 6, 5, 4, 3);
        Tensor guide = randn(rng, {6, 4, 4}), level = randn(rng, {5, 8, 8}), prior = randn(rng, {3, 4, 4});
        return check_gradients(
            [&] {
                ArlmStageOutput o = arlm_stage(guide, level, &prior, p);
                return std::vector<Tensor>{o.refined, o.target_logits, o.aux_map};
            },
            join(all_params(store), {guide, level, prior}), kPiecewiseEps, seed);
    }});

    cases.push_back({"lovasz_softmax", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        Tensor logits = randn(rng, {3, 4, 4});
        LabelMap labels = random_labels(rng, 4, 4, 3);
        return check_gradients([&] { return std::vector<Tensor>{lovasz_softmax(logits, labels)}; }, {logits},
                               kSmoothEps, seed);
    }});

    cases.push_back({"cross_entropy", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        Tensor logits = randn(rng, {4, 4, 4});
        LabelMap labels = random_labels(rng, 4, 4, 4);
        std::vector<float> w{0.5f, 1.0f, 2.0f, 1.5f};
        return check_gradients([&] { return std::vector<Tensor>{weighted_cross_entropy(logits, labels, w)}; },
                               {logits}, kSmoothEps, seed);
    }});

    cases.push_back({"binary_cross_entropy", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        Tensor x = randn(rng, {1, 5, 5});
        BinaryMap t(5, 5);
        for (auto& v : t.values) v = rng() % 2;
        return check_gradients(
            [&] { return std::vector<Tensor>{weighted_binary_cross_entropy(sigmoid(x), t, {1.0f, 3.0f})}; }, {x},
            kSmoothEps, seed);
    }});

    cases.push_back({"attention_loss", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        Tensor x = randn(rng, {1, 6, 6});
        Tensor q = uniform(rng, {1, 6, 6}, 0.0f, 1.0f);
        return check_gradients([&] { return std::vector<Tensor>{attention_loss(sigmoid(x), q)}; }, {x}, kSmoothEps,
                               seed);
    }});

    return cases;
}

std::vector<GradcheckLine> run_gradchecks(const std::vector<GradcheckCase>& cases, std::size_t instances,
                                          double tolerance, std::uint64_t seed) {
    std::vector<GradcheckLine> lines;
    for (const auto& c : cases) {
        GradcheckLine line{c.name, 0.0, true};
        for (std::size_t i = 0; i < instances; ++i) {
            double e;
            try {
                e = c.run(seed + i);
            } catch (const std::exception&) {
                e = std::numeric_limits<double>::infinity();
            }
            if (!(e <= line.worst)) line.worst = e;  // NaN sticks
        }
        line.pass = line.worst < tolerance;
        lines.push_back(line);
    }
    return lines;
}

std::string gradcheck_report(const std::vector<GradcheckLine>& lines) {
    std::string out;
    char buf[256];
    for (const auto& l : lines) {
        std::snprintf(buf, sizeof buf, "gradcheck module=%s worst_rel_err=%.3e result=%s\n", l.name.c_str(), l.worst,
                      l.pass ? "PASS" : "FAIL");
        out += buf;
    }
    return out;
}

}  // namespace cainet
