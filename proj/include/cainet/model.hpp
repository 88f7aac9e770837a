#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cainet/arlm.hpp"
#include "cainet/backbone.hpp"
#include "cainet/cacr.hpp"
#include "cainet/detail_aggregation.hpp"
#include "cainet/gcm.hpp"
#include "cainet/grid.hpp"
#include "cainet/losses.hpp"

namespace cainet {

struct ModelConfig {
    BackboneConfig backbone;
    std::size_t gcm_channels = 16;
    std::size_t arlm_width = 16;
    std::size_t da_reduction = 4;
    ModalityOrder modality_order = ModalityOrder::RgbFirst;

    // A disabled module is replaced by a 1x1 conv bridge with matching
    // output channels. Without the ARLM stream, P4 comes from a coarse head on
    // the global feature and no auxiliary maps exist.
    bool enable_arlm = true;
    bool enable_da = true;
    bool enable_cacr = true;
    bool enable_gcm = true;
    bool enable_thermal = true;  ///< false feeds all-zero thermal features

    std::size_t num_classes() const { return backbone.num_classes; }
    void validate() const;

    static ModelConfig toy(std::size_t num_classes);
    static ModelConfig paper(std::size_t num_classes);
    /// "toy" or "paper"; anything else throws ConfigError.
    static ModelConfig preset(const std::string& name, std::size_t num_classes);
};

/// One row of the module or supervision ablation tables.
struct AblationRow {
    std::string name;  ///< "modules.1" .. "modules.9", "supervision.1" .. "supervision.9"
    bool arlm = true, da = true, cacr = true, gcm = true;
    LossToggles losses;
};

const std::vector<AblationRow>& ablation_rows();
/// Throws ConfigError for an unknown row name.
const AblationRow& ablation_row(const std::string& name);
void apply_ablation(const AblationRow& row, ModelConfig& model, LossToggles& losses);

enum class ForwardMode {
    Inference,      ///< everything needed for P4; no coarse decoders
    Training,       ///< full graph including the three coarse decoders
    RgbBranch,      ///< RGB encoder + its coarse decoder only
    ThermalBranch,  ///< thermal encoder + its coarse decoder only
    GcmBranch,      ///< both encoders, CR3-CR5, GCM and the three coarse decoders
};

struct ParameterReport {
    std::vector<std::pair<std::string, std::size_t>> groups;  ///< top-level prefix -> count
    std::size_t total = 0;
    std::size_t inference = 0;  ///< excludes the coarse decoders
};

class CaiNet {
public:
    CaiNet(const ModelConfig& config, std::uint64_t seed);
    CaiNet(const CaiNet&) = delete;
    CaiNet& operator=(const CaiNet&) = delete;

    /// rgb: 3 x H x W, thermal: 1 x H x W. Heads not produced by `mode` stay undefined.
    StreamOutputs forward(const Tensor& rgb, const Tensor& thermal, ForwardMode mode) const;

    /// P4 logits at input extents, computed without recording.
    Tensor predict_logits(const Tensor& rgb, const Tensor& thermal) const;
    LabelMap predict(const Tensor& rgb, const Tensor& thermal) const;

    ParameterStore& params() { return store_; }
    const ParameterStore& params() const { return store_; }
    const ModelConfig& config() const { return config_; }
    ParameterReport parameter_report() const;

private:
    struct Bridge {
        Tensor weight, bias;
    };
    Bridge make_bridge(const std::string& name, std::size_t in, std::size_t out);
    static Tensor run_bridge(const Bridge& b, const Tensor& x);
    FeaturePyramid zero_thermal(std::size_t h, std::size_t w) const;

    ModelConfig config_;
    ParameterStore store_;
    std::optional<Encoder> rgb_encoder_, thermal_encoder_;
    std::array<std::optional<DaParams>, 2> da_;
    std::array<std::optional<CacrParams>, 3> cacr_;
    std::array<Bridge, 5> stage_bridges_;
    std::optional<GcmParams> gcm_;
    Bridge gcm_bridge_;
    std::optional<ArlmStream> arlm_;
    std::optional<CoarseDecoder> head_;  ///< P4 source when the ARLM stream is ablated
    std::optional<CoarseDecoder> dec_rgb_, dec_thermal_, dec_global_;
};

/// Per-pixel argmax over the class axis of K x H x W logits (first max wins).
LabelMap argmax_labels(const Tensor& logits);

}  // namespace cainet
