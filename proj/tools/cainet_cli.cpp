#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "cainet/aux_targets.hpp"
#include "cainet/gradcheck.hpp"
#include "cainet/metrics.hpp"
#include "cainet/trainer.hpp"

using namespace cainet;
namespace fs = std::filesystem;

namespace {

// Config file first, then every unrecognized "--key=value" argument on top.
TrainConfig resolve_config(const std::string& path, const std::vector<std::string>& extras) {
    KeyValues kv = path.empty() ? KeyValues{} : KeyValues::load(path);
    kv.apply_overrides(extras);
    return TrainConfig::from(kv);
}

Head parse_head(const std::string& s) {
    if (s == "p4") return Head::P4;
    if (s == "rgb") return Head::Rgb;
    if (s == "thermal") return Head::Thermal;
    if (s == "global") return Head::Global;
    throw ConfigError("unknown head '" + s + "' (p4|rgb|thermal|global)");
}

std::vector<SegSample> select(const Corpus& corpus, const std::string& split, const std::string& id) {
    const std::vector<SegSample>* pools[] = {&corpus.train, &corpus.val, &corpus.test};
    std::vector<SegSample> out;
    if (!id.empty()) {
        for (const auto* pool : pools)
            for (const auto& s : *pool)
                if (s.id == id) out.push_back(s);
        if (out.empty()) throw ManifestError("sample '" + id + "' is not listed in the manifest");
        return out;
    }
    if (split == "train") return corpus.train;
    if (split == "val") return corpus.val;
    if (split == "test") return corpus.test;
    throw ConfigError("unknown split '" + split + "'");
}

std::unique_ptr<CaiNet> load_model(const TrainConfig& c, const fs::path& checkpoint, std::size_t corpus_classes) {
    const std::size_t k = c.num_classes ? c.num_classes : corpus_classes;
    auto model = std::make_unique<CaiNet>(c.model_config(k), c.seed);
    load_trained(*model, checkpoint);
    return model;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RGB-thermal semantic segmentation: training, evaluation and tooling"};
    app.require_subcommand(1);
    std::string config_path;

    auto* train = app.add_subcommand("train", "Run one training stage or the whole staged pipeline");
    auto* eval = app.add_subcommand("eval", "Per-class Acc/IoU and means over a split");
    auto* infer_cmd = app.add_subcommand("infer", "Write label and color predictions");
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every module composite");
    auto* aux = app.add_subcommand("auxmaps", "Export binary, boundary and attention targets as images");
    auto* synth = app.add_subcommand("synth", "Generate the synthetic RGB-T corpus");

    for (auto* sub : {train, eval, infer_cmd, aux}) {
        sub->add_option("-c,--config", config_path, "key=value config file");
        sub->allow_extras();
    }

    std::string checkpoint, split = "val", id, head = "p4", output = "predictions";
    for (auto* sub : {eval, infer_cmd}) {
        sub->add_option("--ckpt", checkpoint, "Checkpoint (default: the config's full-stage path)");
        sub->add_option("--split", split, "train|val|test")->capture_default_str();
        sub->add_option("--id", id, "Single sample id instead of a split");
    }
    eval->add_option("--head", head, "p4|rgb|thermal|global")->capture_default_str();
    infer_cmd->add_option("-o,--output", output, "Output directory")->capture_default_str();
    aux->add_option("--split", split, "train|val|test")->capture_default_str();
    aux->add_option("--id", id, "Single sample id instead of a split");
    aux->add_option("-o,--output", output, "Output directory")->capture_default_str();

    std::size_t instances = 5;
    double tolerance = 1e-3;
    std::uint64_t gc_seed = 1;
    grad->add_option("--instances", instances, "Random instances per module")->capture_default_str();
    grad->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
    grad->add_option("--seed", gc_seed, "First instance seed")->capture_default_str();

    SynthCorpusOptions so;
    std::string synth_out = "data";
    synth->add_option("-o,--output", synth_out, "Corpus root")->capture_default_str();
    synth->add_option("--train", so.train)->capture_default_str();
    synth->add_option("--val", so.val)->capture_default_str();
    synth->add_option("--test", so.test)->capture_default_str();
    synth->add_option("--seed", so.seed)->capture_default_str();
    synth->add_option("--size", so.scene.height, "Square image side")->capture_default_str();
    synth->add_option("--classes", so.scene.num_classes)->capture_default_str();
    synth->add_option("--darken", so.darken_factor, "RGB intensity factor")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            TrainConfig c = resolve_config(config_path, train->remaining());
            Corpus corpus = load_corpus(c.data, c.norm);
            fs::create_directories(c.out);
            for (const auto& r : staged_train(c, corpus, &std::cerr)) {
                std::printf("stage=%s steps=%zu early_stopped=%d best_val_miou=%.6f checkpoint=%s log=%s\n",
                            stage_name(r.stage), r.steps, int(r.early_stopped), r.best_val_miou,
                            r.checkpoint.string().c_str(), r.log.string().c_str());
            }
        } else if (*eval) {
            TrainConfig c = resolve_config(config_path, eval->remaining());
            Corpus corpus = load_corpus(c.data, c.norm);
            const fs::path ckpt = checkpoint.empty() ? c.checkpoint_path(Stage::Full) : fs::path(checkpoint);
            auto model = load_model(c, ckpt, corpus.manifest.num_classes);
            ConfusionMatrix cm = evaluate(*model, select(corpus, split, id), parse_head(head), c.eval_threads);
            std::cout << metrics_report(cm, corpus.manifest.class_names, c.metrics);
        } else if (*infer_cmd) {
            TrainConfig c = resolve_config(config_path, infer_cmd->remaining());
            Corpus corpus = load_corpus(c.data, c.norm);
            const fs::path ckpt = checkpoint.empty() ? c.checkpoint_path(Stage::Full) : fs::path(checkpoint);
            auto model = load_model(c, ckpt, corpus.manifest.num_classes);
            fs::create_directories(output);
            for (const auto& s : select(corpus, split, id)) {
                write_prediction(output, s.id, infer(*model, s, corpus.manifest.palette));
                std::printf("%s\n", (fs::path(output) / (s.id + "_labels.png")).string().c_str());
            }
        } else if (*grad) {
            auto lines = run_gradchecks(module_gradchecks(), instances, tolerance, gc_seed);
            std::cout << gradcheck_report(lines);
            for (const auto& l : lines)
                if (!l.pass) return 1;
        } else if (*aux) {
            TrainConfig c = resolve_config(config_path, aux->remaining());
            Corpus corpus = load_corpus(c.data, c.norm);
            fs::create_directories(output);
            for (const auto& s : select(corpus, split, id)) {
                AuxTargets t = make_aux_targets(s.labels, c.aux);
                write_png(fs::path(output) / (s.id + "_binary.png"), map_image(t.binary));
                write_png(fs::path(output) / (s.id + "_boundary.png"), map_image(t.boundary));
                write_png(fs::path(output) / (s.id + "_attention.png"), map_image(t.attention_q));
            }
        } else if (*synth) {
            so.scene.width = so.scene.height;
            Corpus corpus = synth_corpus(so);
            write_corpus(synth_out, corpus);
            std::printf("wrote %zu/%zu/%zu samples to %s\n", corpus.train.size(), corpus.val.size(),
                        corpus.test.size(), synth_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
