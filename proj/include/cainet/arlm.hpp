#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>

#include "cainet/parameter.hpp"

namespace cainet {

// Attention-residual upsample stream. The stage internals are this library's
// own definition: an attention-gated residual over the guide, with one target
// head and one auxiliary sigmoid head per stage. Everything is isolated
// behind arlm_stage() so another stage design can be swapped in.

struct ArlmStageParams {
    Tensor guide_weight, guide_bias;      ///< W x Cg x 1 x 1, only when Cg != W
    Tensor lateral_weight, lateral_bias;  ///< W x Cl x 1 x 1
    Tensor fuse_weight, fuse_bias;        ///< W x 2W x 3 x 3
    Tensor gate_weight, gate_bias;        ///< 1 x W x 1 x 1, the auxiliary head
    Tensor target_weight, target_bias;    ///< K x W x 1 x 1

    static ArlmStageParams create(ParameterStore& store, const std::string& prefix, std::size_t guide_channels,
                                  std::size_t level_channels, std::size_t width, std::size_t num_classes);
};

struct ArlmStageOutput {
    Tensor refined;        ///< upsampled x2, or to the final extent on the last stage
    Tensor target_logits;  ///< K x h x w
    Tensor aux_map;        ///< 1 x h x w, values in (0, 1)
};

/// h = ReLU(conv3x3(concat(guide, lateral(level)))); a = sigmoid(conv1x1(h));
/// refined = guide + a * h; logits = conv1x1(refined) + resize(prior).
/// Inputs are aligned to the larger of the two extents. With `final_extent`
/// set, logits, aux map and refined are resized to it instead of doubled.
ArlmStageOutput arlm_stage(const Tensor& guide, const Tensor& level_feature, const Tensor* prior_logits,
                           const ArlmStageParams& params,
                           std::optional<std::pair<std::size_t, std::size_t>> final_extent = std::nullopt);

struct StreamOutputs {
    Tensor p1, p2, p3, p4;
    Tensor att1, att2;
    Tensor binary_map, boundary_map;
    Tensor s_rgb, s_thermal, s_global;  ///< undefined on the inference path
};

struct ArlmStreamShape {
    std::size_t global_channels;             ///< channels of G
    std::array<std::size_t, 5> stage_channels;  ///< channels of D1, D2, CR3, CR4, CR5
    std::size_t width;
    std::size_t num_classes;
};

class ArlmStream {
public:
    ArlmStream(ParameterStore& store, const std::string& prefix, const ArlmStreamShape& shape);

    /// stage1(G, CR5 + CR4) -> P1, Att1; stage2(., CR3) -> P2, Att2;
    /// stage3(., D2) -> P3, binary; stage4(., D1) -> P4, boundary.
    StreamOutputs run(const Tensor& g, const Tensor& cr5, const Tensor& cr4, const Tensor& cr3, const Tensor& d2,
                      const Tensor& d1, std::size_t label_h, std::size_t label_w) const;

    const std::array<ArlmStageParams, 4>& stages() const { return stages_; }

private:
    Tensor merge_weight_, merge_bias_;  ///< maps CR4 onto CR5's channels when they differ
    std::array<ArlmStageParams, 4> stages_;
};

}  // namespace cainet
