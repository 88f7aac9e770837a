#pragma once

#include <array>
#include <string>
#include <vector>

#include "cainet/parameter.hpp"

namespace cainet {

/// A run of inverted-residual blocks sharing expansion and output width.
struct BlockGroup {
    std::size_t expansion = 6;
    std::size_t channels = 0;
    std::size_t repeats = 1;
};

struct StageSpec {
    std::vector<BlockGroup> groups;
    std::size_t stride = 1;  ///< cumulative output stride after this stage
};

/// Two-stream MobileNet-V2-style encoder layout. Stages are cut at the
/// stride boundaries; the last stage keeps the stride of stage 4.
struct BackboneConfig {
    std::string preset = "toy";
    std::size_t stem_channels = 8;
    std::array<StageSpec, 5> stages{};
    double width_multiplier = 1.0;
    std::size_t num_classes = 3;  ///< k + 1, including "unlabeled"
    std::size_t decoder_channels = 16;

    std::array<std::size_t, 5> stage_channels() const;
    std::array<std::size_t, 5> stage_strides() const;
    std::array<std::size_t, 5> blocks_per_stage() const;
    std::size_t output_stride() const { return stages[4].stride; }
    /// Channel count after applying the width multiplier.
    std::size_t scaled(std::size_t channels) const;

    /// Throws ConfigError on non-positive channels, strides that do not
    /// divide, or a stage-5 stride different from stage 4.
    void validate() const;

    static BackboneConfig toy(std::size_t num_classes);
    static BackboneConfig paper(std::size_t num_classes);
};

enum class Modality { Rgb, Thermal };

struct FeaturePyramid {
    std::array<Tensor, 5> f;
    Modality modality = Modality::Rgb;

    const Tensor& operator[](std::size_t stage) const { return f.at(stage - 1); }
};

/// 1x1 expand -> ReLU6 -> 3x3 depthwise (stride s) -> ReLU6 -> 1x1 project,
/// plus the input when stride is 1 and widths match.
class InvertedResidual {
public:
    InvertedResidual(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                     std::size_t out_channels, std::size_t expansion, std::size_t stride);

    Tensor forward(const Tensor& x) const;
    bool has_skip() const { return skip_; }

    Tensor expand_weight, expand_bias;  // undefined when expansion == 1
    Tensor dw_weight, dw_bias;
    Tensor project_weight, project_bias;

private:
    std::size_t stride_;
    bool skip_;
};

class Encoder {
public:
    Encoder(ParameterStore& store, const std::string& prefix, const BackboneConfig& config,
            std::size_t input_channels, Modality modality);

    /// Throws ConfigError when H or W is not divisible by the output stride.
    FeaturePyramid encode(const Tensor& image) const;

    std::size_t input_channels() const { return input_channels_; }

private:
    BackboneConfig config_;
    std::size_t input_channels_;
    Modality modality_;
    Tensor stem_weight_, stem_bias_;
    std::array<std::vector<InvertedResidual>, 5> stages_;
};

/// 3x3 conv -> ReLU -> 1x1 class conv -> bilinear resize. Emits raw logits.
class CoarseDecoder {
public:
    CoarseDecoder(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                  std::size_t mid_channels, std::size_t num_classes);

    Tensor forward(const Tensor& feature, std::size_t out_h, std::size_t out_w) const;

    Tensor conv_weight, conv_bias, cls_weight, cls_bias;
};

/// Free-function form of a decoder pass with explicit weights.
Tensor decode_coarse(const Tensor& feature, const CoarseDecoder& decoder, std::size_t out_h, std::size_t out_w);

}  // namespace cainet
