#include "cainet/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "cainet/checkpoint.hpp"
#include "cainet/ops.hpp"
#include "cainet/optim.hpp"

namespace cainet {

namespace fs = std::filesystem;

namespace {

ForwardMode train_mode(Stage s) {
    switch (s) {
        case Stage::Rgb: return ForwardMode::RgbBranch;
        case Stage::Thermal: return ForwardMode::ThermalBranch;
        case Stage::Gcm: return ForwardMode::GcmBranch;
        case Stage::Full: return ForwardMode::Training;
    }
    return ForwardMode::Training;
}

LossToggles stage_toggles(const TrainConfig& c, Stage s) {
    if (s == Stage::Full) return c.losses;
    LossToggles t;
    t.target = t.attention = t.binary = t.boundary = false;
    t.decoder = true;
    return t;
}

void require(const TrainConfig& c, Stage stage, Stage needed) {
    const fs::path p = c.checkpoint_path(needed);
    if (!fs::is_regular_file(p)) {
        throw PrerequisiteError(std::string("stage '") + stage_name(stage) + "' requires the '" + stage_name(needed) +
                                "' stage checkpoint at " + p.string());
    }
}

void load_prerequisites(const TrainConfig& c, Stage stage, CaiNet& model) {
    const bool thermal = model.config().enable_thermal;
    switch (stage) {
        case Stage::Rgb:
        case Stage::Thermal: return;
        case Stage::Gcm:
            require(c, stage, Stage::Rgb);
            if (thermal) require(c, stage, Stage::Thermal);
            load_checkpoint(model.params(), c.checkpoint_path(Stage::Rgb), {"rgb.", "decoder.rgb."});
            if (thermal)
                load_checkpoint(model.params(), c.checkpoint_path(Stage::Thermal), {"thermal.", "decoder.thermal."});
            return;
        case Stage::Full:
            require(c, stage, Stage::Rgb);
            if (thermal) require(c, stage, Stage::Thermal);
            require(c, stage, Stage::Gcm);
            load_checkpoint(model.params(), c.checkpoint_path(Stage::Gcm));
            return;
    }
}

Tensor head_logits(const CaiNet& model, const SegSample& s, Head head) {
    NoGradGuard guard;
    switch (head) {
        case Head::P4: return model.forward(s.rgb, s.thermal, ForwardMode::Inference).p4;
        case Head::Rgb: return model.forward(s.rgb, s.thermal, ForwardMode::RgbBranch).s_rgb;
        case Head::Thermal: return model.forward(s.rgb, s.thermal, ForwardMode::ThermalBranch).s_thermal;
        case Head::Global: return model.forward(s.rgb, s.thermal, ForwardMode::GcmBranch).s_global;
    }
    return {};
}

std::vector<std::vector<float>> snapshot(const ParameterStore& store) {
    std::vector<std::vector<float>> out;
    for (const auto& [name, p] : store.all()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

void restore(ParameterStore& store, const std::vector<std::vector<float>>& snap) {
    std::size_t i = 0;
    for (auto& [name, p] : store.all()) {
        std::copy(snap[i].begin(), snap[i].end(), p.tensor.data().begin());
        ++i;
    }
}

}  // namespace

Head stage_head(Stage s) {
    switch (s) {
        case Stage::Rgb: return Head::Rgb;
        case Stage::Thermal: return Head::Thermal;
        case Stage::Gcm: return Head::Global;
        case Stage::Full: return Head::P4;
    }
    return Head::P4;
}

StageResult train_stage(const TrainConfig& c, Stage stage, const Corpus& corpus, std::ostream* progress) {
    const std::size_t k = c.num_classes ? c.num_classes : corpus.manifest.num_classes;
    if (k != corpus.manifest.num_classes) {
        throw ClassCountError("config asks for " + std::to_string(k) + " classes, corpus has " +
                              std::to_string(corpus.manifest.num_classes));
    }
    if (corpus.train.empty()) throw ConfigError("train_stage: empty training split");
    CaiNet model(c.model_config(k), c.seed);
    if (stage == Stage::Thermal && !model.config().enable_thermal)
        throw ConfigError("train_stage: thermal stage requested with enable_thermal=false");
    load_prerequisites(c, stage, model);

    const ForwardMode mode = train_mode(stage);
    const LossToggles toggles = stage_toggles(c, stage);
    const bool need_aux = stage == Stage::Full && (toggles.attention || toggles.binary || toggles.boundary);
    const Head head = stage_head(stage);

    LossWeights weights;
    if (c.class_weights == "enet")
        weights.seg = enet_class_weights(class_frequencies(corpus.train, k));
    else
        weights.seg.w.assign(k, 1.0f);

    fs::create_directories(c.out);
    StageResult result;
    result.stage = stage;
    result.checkpoint = c.checkpoint_path(stage);
    result.log = c.log_path(stage);
    std::ofstream log(result.log);
    if (!log) throw std::runtime_error("cannot write log " + result.log.string());

    std::mt19937_64 rng(c.seed * 1000003u + static_cast<std::uint64_t>(stage));
    std::bernoulli_distribution coin(0.5);
    std::vector<std::size_t> order(corpus.train.size());
    std::size_t cursor = order.size();
    const std::size_t max_steps = c.max_steps[static_cast<std::size_t>(stage)];
    const AdamOptions adam{c.lr};
    const auto& val = corpus.val.empty() ? corpus.train : corpus.val;

    double best = -std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    auto best_params = snapshot(model.params());
    char line[512];

    auto evaluate_epoch = [&](std::size_t step) {
        const double m = miou(evaluate(model, val, head, c.eval_threads), c.metrics);
        result.val_history.push_back(m);
        if (progress) {
            std::snprintf(line, sizeof line, "stage=%s step=%zu val_miou=%.6f\n", stage_name(stage), step, m);
            *progress << line << std::flush;
        }
        if (m >= best + c.min_delta) {
            best = m;
            stale = 0;
            best_params = snapshot(model.params());
        } else if (c.patience > 0 && ++stale >= c.patience) {
            return true;
        }
        return false;
    };

    std::size_t step = 0;
    while (step < max_steps) {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const std::size_t batch = std::min(c.batch_size, order.size() - cursor);
        LossReport report;
        for (std::size_t b = 0; b < batch; ++b) {
            const SegSample& raw = corpus.train[order[cursor + b]];
            const SegSample sample = c.flip && coin(rng) ? hflip(raw) : raw;
            StreamOutputs out = model.forward(sample.rgb, sample.thermal, mode);
            AuxTargets aux;
            if (need_aux) aux = make_aux_targets(sample.labels, c.aux);
            LossResult loss = total_loss(out, sample.labels, aux, weights, toggles, c.lovasz);
            const double inv = 1.0 / static_cast<double>(batch);
            backward(scale(loss.total, static_cast<float>(inv)));
            report += loss.report.scaled(inv);
        }
        adam_step(model.params(), adam);
        cursor += batch;
        ++step;
        log << "step=" << step << " " << report.log_fields() << "\n";
        if (cursor == order.size() || step == max_steps) {
            if (evaluate_epoch(step)) {
                result.early_stopped = true;
                break;
            }
        }
    }
    result.steps = step;
    result.best_val_miou = best;
    restore(model.params(), best_params);
    save_checkpoint(model.params(), result.checkpoint);
    return result;
}

std::vector<StageResult> staged_train(const TrainConfig& c, const Corpus& corpus, std::ostream* progress) {
    std::vector<StageResult> out;
    if (c.stage != "all") {
        out.push_back(train_stage(c, parse_stage(c.stage), corpus, progress));
        return out;
    }
    for (Stage s : {Stage::Rgb, Stage::Thermal, Stage::Gcm, Stage::Full}) {
        if (s == Stage::Thermal && !c.enable_thermal) continue;
        out.push_back(train_stage(c, s, corpus, progress));
    }
    return out;
}

ConfusionMatrix evaluate(const CaiNet& model, const std::vector<SegSample>& samples, Head head,
                         std::size_t threads) {
    const std::size_t k = model.config().num_classes();
    threads = std::max<std::size_t>(1, std::min(threads, samples.size()));
    std::vector<ConfusionMatrix> parts(threads, ConfusionMatrix(k));
    auto work = [&](std::size_t t) {
        for (std::size_t i = t; i < samples.size(); i += threads)
            parts[t].accumulate(argmax_labels(head_logits(model, samples[i], head)), samples[i].labels);
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    ConfusionMatrix cm(k);
    for (const auto& p : parts) cm.merge(p);
    return cm;
}

std::size_t checkpoint_num_classes(const fs::path& path) {
    const auto entries = read_checkpoint(path);
    for (const char* key : {"arlm.stage4.target.bias", "head.cls.bias", "decoder.rgb.cls.bias"}) {
        auto it = entries.find(key);
        if (it != entries.end()) return it->second.numel();
    }
    throw CheckpointError(path.string() + ": no class projection found");
}

void load_trained(CaiNet& model, const fs::path& checkpoint) {
    const std::size_t stored = checkpoint_num_classes(checkpoint);
    if (stored != model.config().num_classes()) {
        throw ClassCountError(checkpoint.string() + " was trained for " + std::to_string(stored) +
                              " classes, the corpus has " + std::to_string(model.config().num_classes()));
    }
    load_checkpoint(model.params(), checkpoint);
}

Prediction infer(const CaiNet& model, const SegSample& sample, const std::vector<Color>& palette) {
    Prediction p;
    p.labels = model.predict(sample.rgb, sample.thermal);
    p.color = colorize(p.labels, palette);
    return p;
}

void write_prediction(const fs::path& dir, const std::string& id, const Prediction& p) {
    write_png(dir / (id + "_labels.png"), label_image(p.labels));
    write_png(dir / (id + "_color.png"), p.color);
}

}  // namespace cainet
