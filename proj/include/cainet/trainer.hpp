#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cainet/config.hpp"
#include "cainet/dataset.hpp"
#include "cainet/metrics.hpp"
#include "cainet/model.hpp"

namespace cainet {

class PrerequisiteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ClassCountError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageResult {
    Stage stage = Stage::Rgb;
    std::size_t steps = 0;
    bool early_stopped = false;
    double best_val_miou = 0.0;
    std::vector<double> val_history;  ///< one entry per epoch
    std::filesystem::path checkpoint;
    std::filesystem::path log;
};

/// Which output an evaluation reads.
enum class Head { P4, Rgb, Thermal, Global };

Head stage_head(Stage s);

/// Runs one stage: loads the prerequisite checkpoints, trains with Adam until
/// max steps or early stop, restores the best validation snapshot and writes
/// the stage checkpoint and step log. `progress` receives human-readable
/// per-epoch lines when non-null.
StageResult train_stage(const TrainConfig& config, Stage stage, const Corpus& corpus,
                        std::ostream* progress = nullptr);

/// config.stage selects one stage or "all" (rgb -> thermal -> gcm -> full).
std::vector<StageResult> staged_train(const TrainConfig& config, const Corpus& corpus,
                                      std::ostream* progress = nullptr);

/// Confusion matrix of `head` predictions over `samples`, sharded across
/// `threads` workers and merged in a fixed order.
ConfusionMatrix evaluate(const CaiNet& model, const std::vector<SegSample>& samples, Head head = Head::P4,
                         std::size_t threads = 1);

/// Class count stored in a checkpoint (from its class-projection biases).
std::size_t checkpoint_num_classes(const std::filesystem::path& path);

/// Builds the configured model and loads every tensor of `checkpoint`.
/// Throws ClassCountError when the checkpoint disagrees with `num_classes`.
void load_trained(CaiNet& model, const std::filesystem::path& checkpoint);

struct Prediction {
    LabelMap labels;
    Image color;
};

/// Argmax over P4, then palette colors.
Prediction infer(const CaiNet& model, const SegSample& sample, const std::vector<Color>& palette);
void write_prediction(const std::filesystem::path& dir, const std::string& id, const Prediction& p);

}  // namespace cainet
