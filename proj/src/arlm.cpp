#include "cainet/arlm.hpp"

#include "cainet/ops.hpp"

namespace cainet {

ArlmStageParams ArlmStageParams::create(ParameterStore& store, const std::string& prefix,
                                        std::size_t guide_channels, std::size_t level_channels, std::size_t width,
                                        std::size_t num_classes) {
    ArlmStageParams p;
    if (guide_channels != width) {
        p.guide_weight = store.create(prefix + ".guide.weight", {width, guide_channels, 1, 1}, Init::KaimingUniform,
                                      guide_channels);
        p.guide_bias = store.create(prefix + ".guide.bias", {width}, Init::Zeros);
    }
    p.lateral_weight = store.create(prefix + ".lateral.weight", {width, level_channels, 1, 1}, Init::KaimingUniform,
                                    level_channels);
    p.lateral_bias = store.create(prefix + ".lateral.bias", {width}, Init::Zeros);
    p.fuse_weight = store.create(prefix + ".fuse.weight", {width, 2 * width, 3, 3}, Init::KaimingUniform,
                                 2 * width * 9);
    p.fuse_bias = store.create(prefix + ".fuse.bias", {width}, Init::Zeros);
    p.gate_weight = store.create(prefix + ".gate.weight", {1, width, 1, 1}, Init::KaimingUniform, width);
    p.gate_bias = store.create(prefix + ".gate.bias", {1}, Init::Zeros);
    p.target_weight = store.create(prefix + ".target.weight", {num_classes, width, 1, 1}, Init::KaimingUniform,
                                   width);
    p.target_bias = store.create(prefix + ".target.bias", {num_classes}, Init::Zeros);
    return p;
}

ArlmStageOutput arlm_stage(const Tensor& guide, const Tensor& level_feature, const Tensor* prior_logits,
                           const ArlmStageParams& params,
                           std::optional<std::pair<std::size_t, std::size_t>> final_extent) {
    const bool guide_larger = guide.dim(1) * guide.dim(2) >= level_feature.dim(1) * level_feature.dim(2);
    const std::size_t h = guide_larger ? guide.dim(1) : level_feature.dim(1);
    const std::size_t w = guide_larger ? guide.dim(2) : level_feature.dim(2);

    Tensor g = params.guide_weight.defined() ? conv2d(guide, params.guide_weight, params.guide_bias) : guide;
    g = bilinear_resize(g, h, w);
    Tensor lateral = bilinear_resize(conv2d(level_feature, params.lateral_weight, params.lateral_bias), h, w);
    if (g.dim(0) != lateral.dim(0) || params.fuse_weight.dim(1) != g.dim(0) + lateral.dim(0)) {
        throw ConfigError("arlm_stage: guide has " + std::to_string(g.dim(0)) + " channels, stream width is " +
                          std::to_string(lateral.dim(0)));
    }

    Tensor hfeat = relu(conv2d(concat_channels({g, lateral}), params.fuse_weight, params.fuse_bias));
    Tensor gate = sigmoid(conv2d(hfeat, params.gate_weight, params.gate_bias));
    Tensor refined = add(g, mul_pixelwise(hfeat, gate));
    Tensor logits = conv2d(refined, params.target_weight, params.target_bias);
    if (prior_logits) logits = add(logits, bilinear_resize(*prior_logits, h, w));

    ArlmStageOutput out;
    if (final_extent) {
        const auto [fh, fw] = *final_extent;
        out.target_logits = bilinear_resize(logits, fh, fw);
        out.aux_map = bilinear_resize(gate, fh, fw);
        out.refined = bilinear_resize(refined, fh, fw);
    } else {
        out.target_logits = logits;
        out.aux_map = gate;
        out.refined = bilinear_resize(refined, 2 * h, 2 * w);
    }
    return out;
}

ArlmStream::ArlmStream(ParameterStore& store, const std::string& prefix, const ArlmStreamShape& shape) {
    const auto& c = shape.stage_channels;
    const std::size_t w = shape.width;
    if (c[3] != c[4]) {
        merge_weight_ = store.create(prefix + ".stage1.merge.weight", {c[4], c[3], 1, 1}, Init::KaimingUniform, c[3]);
        merge_bias_ = store.create(prefix + ".stage1.merge.bias", {c[4]}, Init::Zeros);
    }
    stages_[0] = ArlmStageParams::create(store, prefix + ".stage1", shape.global_channels, c[4], w, shape.num_classes);
    stages_[1] = ArlmStageParams::create(store, prefix + ".stage2", w, c[2], w, shape.num_classes);
    stages_[2] = ArlmStageParams::create(store, prefix + ".stage3", w, c[1], w, shape.num_classes);
    stages_[3] = ArlmStageParams::create(store, prefix + ".stage4", w, c[0], w, shape.num_classes);
}

StreamOutputs ArlmStream::run(const Tensor& g, const Tensor& cr5, const Tensor& cr4, const Tensor& cr3,
                              const Tensor& d2, const Tensor& d1, std::size_t label_h, std::size_t label_w) const {
    Tensor cr4m = merge_weight_.defined() ? conv2d(cr4, merge_weight_, merge_bias_) : cr4;
    Tensor merged = add(cr5, bilinear_resize(cr4m, cr5.dim(1), cr5.dim(2)));

    StreamOutputs out;
    auto s1 = arlm_stage(g, merged, nullptr, stages_[0]);
    auto s2 = arlm_stage(s1.refined, cr3, &s1.target_logits, stages_[1]);
    auto s3 = arlm_stage(s2.refined, d2, &s2.target_logits, stages_[2]);
    auto s4 = arlm_stage(s3.refined, d1, &s3.target_logits, stages_[3], std::make_pair(label_h, label_w));
    out.p1 = s1.target_logits;
    out.att1 = s1.aux_map;
    out.p2 = s2.target_logits;
    out.att2 = s2.aux_map;
    out.p3 = s3.target_logits;
    out.binary_map = s3.aux_map;
    out.p4 = s4.target_logits;
    out.boundary_map = s4.aux_map;
    return out;
}

}  // namespace cainet
