#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cainet/aux_targets.hpp"
#include "cainet/dataset.hpp"
#include "cainet/losses.hpp"
#include "cainet/metrics.hpp"
#include "cainet/model.hpp"

namespace cainet {

/// Flat key=value settings. Blank lines and '#' comments are ignored.
class KeyValues {
public:
    static KeyValues parse(const std::string& text, const std::string& origin = "<text>");
    static KeyValues load(const std::filesystem::path& path);

    /// Applies "--key=value" arguments in order; anything else throws ConfigError.
    void apply_overrides(const std::vector<std::string>& args);
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

enum class Stage { Rgb, Thermal, Gcm, Full };

const char* stage_name(Stage s);
Stage parse_stage(const std::string& name);

struct TrainConfig {
    std::string preset = "toy";
    std::size_t num_classes = 0;  ///< 0: take it from the corpus manifest
    double lr = 5e-4;
    std::size_t batch_size = 8;
    std::string stage = "all";  ///< rgb | thermal | gcm | full | all
    std::array<std::size_t, 4> max_steps{150, 150, 200, 1500};  ///< per stage, rgb..full
    std::size_t patience = 10;  ///< epochs without improvement; 0 disables early stopping
    double min_delta = 1e-4;
    std::uint64_t seed = 1;
    bool flip = true;
    std::string class_weights = "enet";  ///< enet | uniform
    std::size_t eval_threads = 1;

    std::string ablation;  ///< optional named row, applied before the enable_* keys
    bool enable_arlm = true, enable_da = true, enable_cacr = true, enable_gcm = true, enable_thermal = true;
    ModalityOrder modality_order = ModalityOrder::RgbFirst;
    std::size_t gcm_channels = 0, arlm_width = 0, da_reduction = 0;  ///< 0: preset value

    LossToggles losses;
    LovaszOptions lovasz;
    AuxTargetOptions aux;
    MetricOptions metrics;
    Normalization norm;

    std::filesystem::path data = "data";
    std::filesystem::path out = "runs";
    std::map<std::string, std::filesystem::path> checkpoints;  ///< stage name -> path override

    /// Throws ConfigError on unknown keys or malformed values.
    static TrainConfig from(const KeyValues& kv);
    /// Every key with its current value, parseable by from().
    std::string to_text() const;

    std::filesystem::path checkpoint_path(Stage s) const;
    std::filesystem::path log_path(Stage s) const;
    ModelConfig model_config(std::size_t num_classes) const;
};

}  // namespace cainet
