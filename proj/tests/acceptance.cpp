// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

#include "cainet/aux_targets.hpp"
#include "cainet/cacr.hpp"
#include "cainet/gcm.hpp"
#include "cainet/gradcheck.hpp"
#include "cainet/losses.hpp"
#include "cainet/ops.hpp"
#include "cainet/trainer.hpp"
#include "oracles.hpp"

using namespace cainet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome(const fs::path&)> run;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Tensor uniform(std::mt19937_64& rng, Shape shape, float lo, float hi) {
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (float& v : t.data()) v = u(rng);
    return t;
}

LabelMap random_labels(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t k) {
    LabelMap l(h, w);
    for (auto& v : l.values) v = std::int32_t(rng() % k);
    return l;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return INFINITY;
    double d = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) d = std::max(d, std::abs(double(a[i]) - double(b[i])));
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---- 1 ----

Outcome gradient_suite(const fs::path&) {
    const auto t0 = Clock::now();
    auto lines = run_gradchecks(module_gradchecks(), 5, 1e-3, 1);
    const double secs = seconds_since(t0);
    std::cout << gradcheck_report(lines);
    Outcome o;
    const GradcheckLine* worst = &lines.front();
    for (const auto& l : lines) {
        o.pass = o.pass && l.pass;
        if (!(l.worst <= worst->worst)) worst = &l;
    }
    o.pass = o.pass && secs < 120.0;
    o.detail = std::to_string(lines.size()) + " modules x 5 seeds, worst " + fmt("%.2e", worst->worst) + " (" +
               worst->name + "), " + fmt("%.1fs", secs);
    return o;
}

// ---- 2 ----

Outcome oracle_suite(const fs::path&) {
    std::mt19937_64 rng(2024);
    double mm = 0, cv = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = 1 + rng() % 24, q = 1 + rng() % 24, r = 1 + rng() % 24;
        Tensor a = uniform(rng, {p, q}, -10, 10), b = uniform(rng, {q, r}, -10, 10);
        mm = std::max(mm, max_abs_diff(matmul(a, b), oracle::matmul(a, b)));
        const std::size_t cin = 1 + rng() % 4, cout = 1 + rng() % 4, k = 2 * (rng() % 3) + 1, stride = 1 + rng() % 2;
        const std::size_t h = k + rng() % 6, w = k + rng() % 6, pad = rng() % (k / 2 + 1);
        Tensor x = uniform(rng, {cin, h, w}, -10, 10), wt = uniform(rng, {cout, cin, k, k}, -10, 10);
        Tensor bias = uniform(rng, {cout}, -10, 10);
        cv = std::max(cv, max_abs_diff(conv2d(x, wt, bias, {stride, int(pad)}), oracle::conv(x, wt, bias, stride, pad)));
    }

    std::size_t metric_mismatch = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t k = 2 + rng() % 4;
        LabelMap t = random_labels(rng, 8, 8, k), p = random_labels(rng, 8, 8, k);
        ConfusionMatrix cm(k);
        cm.accumulate(p, t);
        const auto ref = oracle::set_metrics(t, p, k);
        metric_mismatch += miou(cm) != ref.miou || macc(cm) != ref.macc;
    }

    double lov = 0;
    for (LovaszClasses set : {LovaszClasses::Present, LovaszClasses::All}) {
        const bool all = set == LovaszClasses::All;
        for (int a = 0; a <= 10; ++a)
            for (int y = 0; y < 2; ++y) {
                const float pa = float(a) / 10.0f;
                Tensor probs = Tensor::from({2, 1, 1}, {1.0f - pa, pa});
                LabelMap l(1, 1, y);
                lov = std::max(lov, std::abs(lovasz_softmax_probs(probs, l, {set}).item() - oracle::lovasz(probs, l, all)));
            }
        for (int a = 0; a <= 10; ++a)
            for (int b = 0; b <= 10; ++b)
                for (int lab = 0; lab < 4; ++lab) {
                    const float pa = float(a) / 10.0f, pb = float(b) / 10.0f;
                    Tensor probs = Tensor::from({2, 1, 2}, {1.0f - pa, 1.0f - pb, pa, pb});
                    LabelMap l(1, 2);
                    l(0, 0) = lab & 1;
                    l(0, 1) = lab >> 1;
                    lov = std::max(lov,
                                   std::abs(lovasz_softmax_probs(probs, l, {set}).item() - oracle::lovasz(probs, l, all)));
                }
    }

    std::size_t morph_mismatch = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t h = 1 + rng() % 10, w = 1 + rng() % 10, k = 2 * (rng() % 3) + 1;
        BinaryMap b(h, w);
        for (auto& v : b.values) v = rng() % 5 < 2;
        morph_mismatch += !(dilate(b, k) == oracle::morph(b, k, true));
        morph_mismatch += !(erode(b, k) == oracle::morph(b, k, false));
    }

    Outcome o;
    o.pass = mm < 1e-6 && cv < 1e-6 && metric_mismatch == 0 && lov < 1e-6 && morph_mismatch == 0;
    o.detail = "matmul " + fmt("%.1e", mm) + ", conv " + fmt("%.1e", cv) + ", metric mismatches " +
               std::to_string(metric_mismatch) + ", lovasz " + fmt("%.1e", lov) + ", morphology mismatches " +
               std::to_string(morph_mismatch);
    return o;
}

// ---- 3 ----

Outcome identity_suite(const fs::path&) {
    std::mt19937_64 rng(3);
    NoGradGuard ng;

    double cacr_err = 0;
    for (std::size_t c : {2u, 4u, 8u, 16u}) {
        ParameterStore store(c);
        CacrParams p = CacrParams::create(store, "cacr", c);
        std::fill(p.fc2.data().begin(), p.fc2.data().end(), 0.0f);
        Tensor r = uniform(rng, {c, 4, 5}, -2, 2), t = uniform(rng, {c, 4, 5}, -2, 2);
        Tensor sum = add(r, t);
        cacr_err = std::max(cacr_err, max_abs_diff(cacr_forward(r, t, p), sum));
    }

    double tele = 0;
    for (int rep = 0; rep < 3; ++rep) {
        ParameterStore store(10 + rep);
        ArlmStream s(store, "arlm", {16, {8, 16, 24, 32, 32}, 16, 3});
        for (std::size_t i = 1; i < 4; ++i) {
            Tensor w = s.stages()[i].target_weight, b = s.stages()[i].target_bias;
            std::fill(w.data().begin(), w.data().end(), 0.0f);
            std::fill(b.data().begin(), b.data().end(), 0.0f);
        }
        StreamOutputs o = s.run(uniform(rng, {16, 4, 4}, -1, 1), uniform(rng, {32, 4, 4}, -1, 1),
                                uniform(rng, {32, 4, 4}, -1, 1), uniform(rng, {24, 8, 8}, -1, 1),
                                uniform(rng, {16, 16, 16}, -1, 1), uniform(rng, {8, 32, 32}, -1, 1), 32, 32);
        Tensor chain = bilinear_resize(bilinear_resize(bilinear_resize(o.p1, 8, 8), 16, 16), 32, 32);
        tele = std::max(tele, max_abs_diff(o.p4, chain));
    }

    double att = 0;
    for (int rep = 0; rep < 10; ++rep) {
        Tensor q = uniform(rng, {1, 8, 8}, 0, 1);
        att = std::max(att, std::abs(double(attention_loss(q, q).item()) + 1.0));
    }

    double smax = 0;
    auto check_sums = [&](const Tensor& s, std::size_t outer, std::size_t len, std::size_t stride_outer,
                          std::size_t stride_inner) {
        for (std::size_t o = 0; o < outer; ++o) {
            double total = 0;
            for (std::size_t i = 0; i < len; ++i) {
                const float v = s[o * stride_outer + i * stride_inner];
                if (v < 0) smax = INFINITY;
                total += v;
            }
            smax = std::max(smax, std::abs(total - 1.0));
        }
    };
    for (float scale : {0.1f, 1.0f, 10.0f, 100.0f}) {
        Tensor x = uniform(rng, {5, 6, 7}, -scale, scale);
        check_sums(softmax_axis(x, 0), 42, 5, 1, 42);
        Tensor m = uniform(rng, {6, 9}, -scale, scale);
        check_sums(softmax_axis(m, 1), 6, 9, 9, 1);
        check_sums(softmax_axis(m, 0), 9, 6, 1, 9);
        check_sums(global_softmax(m), 1, 54, 0, 1);
    }

    Outcome o;
    o.pass = cacr_err == 0.0 && tele == 0.0 && att <= 1e-6 && smax <= 1e-6;
    o.detail = "cacr zero-path " + fmt("%.1e", cacr_err) + ", arlm telescoping " + fmt("%.1e", tele) +
               ", attention(q,q)+1 " + fmt("%.1e", att) + ", softmax sums " + fmt("%.1e", smax);
    return o;
}

// ---- training helpers ----

struct RunSummary {
    std::size_t steps = 0;
    double train = 0, val = 0, secs = 0;
    std::vector<StageResult> stages;
};

RunSummary train_and_measure(const TrainConfig& c, const Corpus& corpus) {
    RunSummary r;
    const auto t0 = Clock::now();
    r.stages = staged_train(c, corpus);
    r.secs = seconds_since(t0);
    for (const auto& s : r.stages) r.steps += s.steps;
    CaiNet net(c.model_config(corpus.manifest.num_classes), c.seed);
    load_trained(net, c.checkpoint_path(Stage::Full));
    r.train = miou(evaluate(net, corpus.train), c.metrics);
    r.val = miou(evaluate(net, corpus.val), c.metrics);
    return r;
}

TrainConfig fixed_schedule(const fs::path& out) {
    TrainConfig c;
    c.patience = 0;
    c.max_steps = {100, 100, 100, 400};
    c.out = out;
    return c;
}

std::string stage_steps(const RunSummary& r) {
    std::string s;
    for (const auto& st : r.stages) s += std::string(s.empty() ? "" : "/") + std::to_string(st.steps);
    return s;
}

// ---- 4 ----

Outcome overfit(const fs::path& work) {
    Corpus corpus = synth_corpus({});
    TrainConfig c;
    c.out = work / "overfit";
    RunSummary r = train_and_measure(c, corpus);
    Outcome o;
    const bool setup = corpus.train.size() + corpus.val.size() + corpus.test.size() == 64 &&
                       corpus.manifest.num_classes == 3 && c.batch_size == 8 && c.lr == 5e-4 && c.preset == "toy";
    o.pass = setup && r.steps <= 2000 && r.train >= 0.90 && r.val >= 0.75 && r.secs <= 900;
    o.detail = "train mIoU " + fmt("%.4f", r.train) + ", val mIoU " + fmt("%.4f", r.val) + ", steps " +
               std::to_string(r.steps) + " (" + stage_steps(r) + "), " + fmt("%.0fs", r.secs);
    return o;
}

// ---- 5 ----

Outcome thermal_complement(const fs::path& work) {
    SynthCorpusOptions so;
    so.darken_factor = 0.05;
    Corpus corpus = synth_corpus(so);
    float brightest = 0;
    for (const auto* split : {&corpus.train, &corpus.val, &corpus.test})
        for (const auto& s : *split)
            for (float v : s.rgb.data()) brightest = std::max(brightest, v);

    TrainConfig full = fixed_schedule(work / "dark_full");
    TrainConfig rgb_only = fixed_schedule(work / "dark_rgb");
    rgb_only.enable_thermal = false;
    RunSummary a = train_and_measure(full, corpus), b = train_and_measure(rgb_only, corpus);
    Outcome o;
    o.pass = brightest <= 0.05f && a.steps == b.steps + full.max_steps[1] && a.val - b.val >= 0.10;
    o.detail = "max rgb " + fmt("%.4f", brightest) + ", full val " + fmt("%.4f", a.val) + ", rgb-only val " +
               fmt("%.4f", b.val) + ", gap " + fmt("%+.4f", a.val - b.val) + ", full-stage steps " +
               std::to_string(a.stages.back().steps) + "/" + std::to_string(b.stages.back().steps);
    return o;
}

// ---- 6 ----

Outcome ablation_order(const fs::path& work) {
    Corpus corpus = synth_corpus({});
    RunSummary full = train_and_measure(fixed_schedule(work / "abl_full"), corpus);
    Outcome o;
    o.detail = "full " + fmt("%.4f", full.val);
    for (const char* module : {"arlm", "da", "cacr", "gcm"}) {
        TrainConfig c = fixed_schedule(work / (std::string("abl_no_") + module));
        KeyValues kv;
        kv.set(std::string("enable_") + module, "false");
        TrainConfig parsed = TrainConfig::from(kv);
        c.enable_arlm = parsed.enable_arlm;
        c.enable_da = parsed.enable_da;
        c.enable_cacr = parsed.enable_cacr;
        c.enable_gcm = parsed.enable_gcm;
        RunSummary r = train_and_measure(c, corpus);
        const bool ok = full.val >= r.val - 0.02;
        o.pass = o.pass && ok;
        o.detail += std::string(", -") + module + " " + fmt("%.4f", r.val) + (ok ? "" : " VIOLATION");
    }
    return o;
}

// ---- 7 ----

Outcome parameter_count(const fs::path&) {
    CaiNet net(ModelConfig::paper(9), 1);
    ParameterReport r = net.parameter_report();
    const double rel = (double(r.total) - 12.16e6) / 12.16e6;
    Outcome o;
    o.pass = std::abs(rel) <= 0.20;
    o.detail = "total " + std::to_string(r.total) + " (" + fmt("%+.1f%%", 100 * rel) + " vs 12.16M), inference " +
               std::to_string(r.inference);
    return o;
}

// ---- 8 ----

Outcome determinism(const fs::path& work) {
    SynthCorpusOptions so;
    so.train = 16;
    Corpus corpus = synth_corpus(so);
    auto run = [&](const std::string& tag) {
        TrainConfig c;
        c.max_steps = {16, 16, 16, 32};
        c.out = work / tag;
        return staged_train(c, corpus);
    };
    auto a = run("det_a"), b = run("det_b");
    std::size_t files = 0, differing = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (auto [pa, pb] : {std::pair{a[i].checkpoint, b[i].checkpoint}, std::pair{a[i].log, b[i].log}}) {
            ++files;
            const std::string sa = slurp(pa);
            differing += sa.empty() || sa != slurp(pb);
        }
    }
    Outcome o;
    o.pass = a.size() == 4 && b.size() == 4 && differing == 0;
    o.detail = std::to_string(files) + " files compared (4 checkpoints, 4 logs per run), " + std::to_string(differing) +
               " differ";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    fs::path work = fs::temp_directory_path() / "cainet_acceptance";
    app.add_option("--only", only, "Criterion ids to run (default: all)")->delimiter(',');
    app.add_option("--work", work, "Scratch directory for training runs");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "gradient-suite", gradient_suite},  {2, "oracle-suite", oracle_suite},
        {3, "identity-suite", identity_suite},  {4, "end-to-end-overfit", overfit},
        {5, "thermal-complement", thermal_complement}, {6, "ablation-ordering", ablation_order},
        {7, "parameter-count", parameter_count}, {8, "determinism", determinism},
    };

    fs::remove_all(work);
    fs::create_directories(work);
    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = c.run(work);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %d %s: %s (%s) [%.1fs]\n", c.id, c.name.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    fs::remove_all(work);
    return failures == 0 ? 0 : 1;
}
