#include "cainet/backbone.hpp"

#include <cmath>

#include "cainet/ops.hpp"

namespace cainet {

std::array<std::size_t, 5> BackboneConfig::stage_channels() const {
    std::array<std::size_t, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = scaled(stages[i].groups.back().channels);
    return out;
}

std::array<std::size_t, 5> BackboneConfig::stage_strides() const {
    std::array<std::size_t, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = stages[i].stride;
    return out;
}

std::array<std::size_t, 5> BackboneConfig::blocks_per_stage() const {
    std::array<std::size_t, 5> out{};
    for (std::size_t i = 0; i < 5; ++i)
        for (const auto& g : stages[i].groups) out[i] += g.repeats;
    return out;
}

std::size_t BackboneConfig::scaled(std::size_t channels) const {
    const auto c = static_cast<std::size_t>(std::lround(static_cast<double>(channels) * width_multiplier));
    return c == 0 ? 1 : c;
}

void BackboneConfig::validate() const {
    if (!(width_multiplier > 0.0)) throw ConfigError("backbone: width multiplier must be positive");
    if (stem_channels == 0) throw ConfigError("backbone: stem channels must be positive");
    if (num_classes == 0) throw ConfigError("backbone: need at least one class");
    if (decoder_channels == 0) throw ConfigError("backbone: decoder channels must be positive");
    std::size_t previous = 1;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& s = stages[i];
        if (s.groups.empty()) throw ConfigError("backbone: stage " + std::to_string(i + 1) + " has no blocks");
        for (const auto& g : s.groups) {
            if (g.channels == 0 || g.repeats == 0 || g.expansion == 0) {
                throw ConfigError("backbone: stage " + std::to_string(i + 1) + " has an empty block group");
            }
        }
        if (s.stride == 0 || s.stride % previous != 0) {
            throw ConfigError("backbone: stage " + std::to_string(i + 1) + " stride " + std::to_string(s.stride) +
                              " is not a multiple of " + std::to_string(previous));
        }
        previous = s.stride;
    }
    if (stages[4].stride != stages[3].stride) {
        throw ConfigError("backbone: stage 5 must keep the stride of stage 4 (last downsample removed)");
    }
}

BackboneConfig BackboneConfig::toy(std::size_t num_classes) {
    BackboneConfig c;
    c.preset = "toy";
    c.stem_channels = 8;
    c.stages = {{
        {{{1, 8, 1}}, 1},
        {{{2, 16, 1}}, 2},
        {{{2, 24, 1}}, 4},
        {{{2, 32, 1}}, 8},
        {{{2, 32, 1}}, 8},
    }};
    c.num_classes = num_classes;
    c.decoder_channels = 16;
    return c;
}

BackboneConfig BackboneConfig::paper(std::size_t num_classes) {
    // MobileNet-V2 feature plan (t, c, n) with the stride-32 downsample removed.
    BackboneConfig c;
    c.preset = "paper";
    c.stem_channels = 32;
    c.stages = {{
        {{{1, 16, 1}}, 2},
        {{{6, 24, 2}}, 4},
        {{{6, 32, 3}}, 8},
        {{{6, 64, 4}, {6, 96, 3}}, 16},
        {{{6, 160, 3}, {6, 320, 1}}, 16},
    }};
    c.num_classes = num_classes;
    c.decoder_channels = 256;
    return c;
}

InvertedResidual::InvertedResidual(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                                   std::size_t out_channels, std::size_t expansion, std::size_t stride)
    : stride_(stride), skip_(stride == 1 && in_channels == out_channels) {
    const std::size_t hidden = in_channels * expansion;
    if (expansion > 1) {
        expand_weight = store.create(prefix + ".expand.weight", {hidden, in_channels, 1, 1}, Init::KaimingUniform,
                                     in_channels);
        expand_bias = store.create(prefix + ".expand.bias", {hidden}, Init::Zeros);
    }
    dw_weight = store.create(prefix + ".dw.weight", {hidden, 1, 3, 3}, Init::KaimingUniform, 9);
    dw_bias = store.create(prefix + ".dw.bias", {hidden}, Init::Zeros);
    project_weight = store.create(prefix + ".project.weight", {out_channels, hidden, 1, 1}, Init::KaimingUniform,
                                  hidden);
    project_bias = store.create(prefix + ".project.bias", {out_channels}, Init::Zeros);
}

Tensor InvertedResidual::forward(const Tensor& x) const {
    Tensor h = x;
    if (expand_weight.defined()) h = relu6(conv2d(h, expand_weight, expand_bias));
    h = relu6(depthwise_conv2d(h, dw_weight, dw_bias, {stride_, 1}));
    h = conv2d(h, project_weight, project_bias);
    return skip_ ? add(h, x) : h;
}

Encoder::Encoder(ParameterStore& store, const std::string& prefix, const BackboneConfig& config,
                 std::size_t input_channels, Modality modality)
    : config_(config), input_channels_(input_channels), modality_(modality) {
    config_.validate();
    const std::size_t stem = config_.scaled(config_.stem_channels);
    stem_weight_ = store.create(prefix + ".stem.weight", {stem, input_channels, 3, 3}, Init::KaimingUniform,
                                input_channels * 9);
    stem_bias_ = store.create(prefix + ".stem.bias", {stem}, Init::Zeros);
    std::size_t channels = stem;
    for (std::size_t s = 0; s < 5; ++s) {
        std::size_t stride = s == 0 ? 1 : config_.stages[s].stride / config_.stages[s - 1].stride;
        std::size_t index = 0;
        for (const auto& group : config_.stages[s].groups) {
            const std::size_t out = config_.scaled(group.channels);
            for (std::size_t r = 0; r < group.repeats; ++r) {
                stages_[s].emplace_back(store,
                                        prefix + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(index++),
                                        channels, out, group.expansion, stride);
                channels = out;
                stride = 1;
            }
        }
    }
}

FeaturePyramid Encoder::encode(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != input_channels_) {
        throw DimensionError("encode: expected " + std::to_string(input_channels_) + "xHxW input, got " +
                             shape_str(image.shape()));
    }
    const std::size_t stride = config_.output_stride();
    if (image.dim(1) % stride != 0 || image.dim(2) % stride != 0) {
        throw ConfigError("encode: input " + shape_str(image.shape()) + " is not divisible by output stride " +
                          std::to_string(stride));
    }
    FeaturePyramid pyramid;
    pyramid.modality = modality_;
    Tensor h = relu6(conv2d(image, stem_weight_, stem_bias_, {config_.stages[0].stride, 1}));
    for (std::size_t s = 0; s < 5; ++s) {
        for (const auto& block : stages_[s]) h = block.forward(h);
        pyramid.f[s] = h;
    }
    return pyramid;
}

CoarseDecoder::CoarseDecoder(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                             std::size_t mid_channels, std::size_t num_classes) {
    conv_weight = store.create(prefix + ".conv.weight", {mid_channels, in_channels, 3, 3}, Init::KaimingUniform,
                               in_channels * 9);
    conv_bias = store.create(prefix + ".conv.bias", {mid_channels}, Init::Zeros);
    cls_weight = store.create(prefix + ".cls.weight", {num_classes, mid_channels, 1, 1}, Init::KaimingUniform,
                              mid_channels);
    cls_bias = store.create(prefix + ".cls.bias", {num_classes}, Init::Zeros);
}

Tensor CoarseDecoder::forward(const Tensor& feature, std::size_t out_h, std::size_t out_w) const {
    Tensor h = relu(conv2d(feature, conv_weight, conv_bias));
    return bilinear_resize(conv2d(h, cls_weight, cls_bias), out_h, out_w);
}

Tensor decode_coarse(const Tensor& feature, const CoarseDecoder& decoder, std::size_t out_h, std::size_t out_w) {
    return decoder.forward(feature, out_h, out_w);
}

}  // namespace cainet
