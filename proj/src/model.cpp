#include "cainet/model.hpp"

#include <algorithm>

#include "cainet/ops.hpp"

namespace cainet {

void ModelConfig::validate() const {
    backbone.validate();
    if (gcm_channels == 0) throw ConfigError("model: gcm channels must be positive");
    if (arlm_width == 0) throw ConfigError("model: arlm width must be positive");
    if (da_reduction == 0) throw ConfigError("model: da reduction must be positive");
    const auto c = backbone.stage_channels();
    if (enable_cacr)
        for (std::size_t s = 2; s < 5; ++s)
            if (c[s] % 2) throw ConfigError("model: CACR needs even channels, stage " + std::to_string(s + 1) +
                                            " has " + std::to_string(c[s]));
}

ModelConfig ModelConfig::toy(std::size_t num_classes) {
    ModelConfig m;
    m.backbone = BackboneConfig::toy(num_classes);
    m.gcm_channels = 16;
    m.arlm_width = 16;
    m.da_reduction = 4;
    return m;
}

ModelConfig ModelConfig::paper(std::size_t num_classes) {
    ModelConfig m;
    m.backbone = BackboneConfig::paper(num_classes);
    m.gcm_channels = 64;
    m.arlm_width = 256;
    m.da_reduction = 16;
    return m;
}

ModelConfig ModelConfig::preset(const std::string& name, std::size_t num_classes) {
    if (name == "toy") return toy(num_classes);
    if (name == "paper") return paper(num_classes);
    throw ConfigError("unknown preset '" + name + "' (expected toy or paper)");
}

const std::vector<AblationRow>& ablation_rows() {
    static const std::vector<AblationRow> rows = [] {
        std::vector<AblationRow> r;
        auto mod = [&](int n, bool arlm, bool da, bool cacr, bool gcm) {
            AblationRow row;
            row.name = "modules." + std::to_string(n);
            row.arlm = arlm;
            row.da = da;
            row.cacr = cacr;
            row.gcm = gcm;
            r.push_back(row);
        };
        mod(1, false, false, false, false);
        mod(2, true, false, false, false);
        mod(3, true, true, false, false);
        mod(4, true, false, true, false);
        mod(5, true, false, false, true);
        mod(6, true, false, true, true);
        mod(7, true, true, false, true);
        mod(8, true, true, true, false);
        mod(9, true, true, true, true);
        auto sup = [&](int n, bool target, bool att, bool bin, bool bnd) {
            AblationRow row;
            row.name = "supervision." + std::to_string(n);
            row.losses = {true, target, att, bin, bnd};
            r.push_back(row);
        };
        sup(1, false, false, false, false);
        sup(2, true, false, false, false);
        sup(3, true, true, false, false);
        sup(4, true, false, true, false);
        sup(5, true, false, false, true);
        sup(6, true, false, true, true);
        sup(7, true, true, false, true);
        sup(8, true, true, true, false);
        sup(9, true, true, true, true);
        return r;
    }();
    return rows;
}

const AblationRow& ablation_row(const std::string& name) {
    for (const auto& r : ablation_rows())
        if (r.name == name) return r;
    throw ConfigError("unknown ablation row '" + name + "'");
}

void apply_ablation(const AblationRow& row, ModelConfig& model, LossToggles& losses) {
    model.enable_arlm = row.arlm;
    model.enable_da = row.da;
    model.enable_cacr = row.cacr;
    model.enable_gcm = row.gcm;
    losses = row.losses;
}

CaiNet::Bridge CaiNet::make_bridge(const std::string& name, std::size_t in, std::size_t out) {
    return {store_.create("bridge." + name + ".weight", {out, in, 1, 1}, Init::KaimingUniform, in),
            store_.create("bridge." + name + ".bias", {out}, Init::Zeros)};
}

Tensor CaiNet::run_bridge(const Bridge& b, const Tensor& x) { return conv2d(x, b.weight, b.bias); }

CaiNet::CaiNet(const ModelConfig& config, std::uint64_t seed) : config_(config), store_(seed) {
    config_.validate();
    const auto& bb = config_.backbone;
    const auto c = bb.stage_channels();
    const std::size_t k = bb.num_classes;

    rgb_encoder_.emplace(store_, "rgb", bb, 3, Modality::Rgb);
    if (config_.enable_thermal) thermal_encoder_.emplace(store_, "thermal", bb, 1, Modality::Thermal);

    for (std::size_t s = 0; s < 2; ++s) {
        const std::string stage = "stage" + std::to_string(s + 1);
        if (config_.enable_da)
            da_[s] = DaParams::create(store_, "da." + stage, c[s], config_.da_reduction);
        else
            stage_bridges_[s] = make_bridge("da." + stage, 2 * c[s], c[s]);
    }
    for (std::size_t s = 2; s < 5; ++s) {
        const std::string stage = "stage" + std::to_string(s + 1);
        if (config_.enable_cacr)
            cacr_[s - 2] = CacrParams::create(store_, "cacr." + stage, c[s]);
        else
            stage_bridges_[s] = make_bridge("cacr." + stage, 2 * c[s], c[s]);
    }
    const std::size_t concat = c[2] + c[3] + c[4];
    if (config_.enable_gcm)
        gcm_ = GcmParams::create(store_, "gcm", concat, config_.gcm_channels);
    else
        gcm_bridge_ = make_bridge("gcm", concat, config_.gcm_channels);

    if (config_.enable_arlm) {
        arlm_.emplace(store_, "arlm",
                      ArlmStreamShape{config_.gcm_channels, {c[0], c[1], c[2], c[3], c[4]}, config_.arlm_width, k});
    } else {
        head_.emplace(store_, "head", config_.gcm_channels, bb.decoder_channels, k);
    }

    dec_rgb_.emplace(store_, "decoder.rgb", c[4], bb.decoder_channels, k);
    if (config_.enable_thermal) dec_thermal_.emplace(store_, "decoder.thermal", c[4], bb.decoder_channels, k);
    dec_global_.emplace(store_, "decoder.global", config_.gcm_channels, bb.decoder_channels, k);
}

FeaturePyramid CaiNet::zero_thermal(std::size_t h, std::size_t w) const {
    FeaturePyramid p;
    p.modality = Modality::Thermal;
    const auto c = config_.backbone.stage_channels();
    const auto s = config_.backbone.stage_strides();
    for (std::size_t i = 0; i < 5; ++i) p.f[i] = Tensor::zeros({c[i], h / s[i], w / s[i]});
    return p;
}

StreamOutputs CaiNet::forward(const Tensor& rgb, const Tensor& thermal, ForwardMode mode) const {
    if (rgb.rank() != 3 || thermal.rank() != 3 || rgb.dim(1) != thermal.dim(1) || rgb.dim(2) != thermal.dim(2)) {
        throw DimensionError("forward: rgb " + shape_str(rgb.shape()) + " and thermal " +
                             shape_str(thermal.shape()) + " must share extents");
    }
    const std::size_t h = rgb.dim(1), w = rgb.dim(2);
    StreamOutputs out;

    if (mode == ForwardMode::RgbBranch) {
        out.s_rgb = dec_rgb_->forward(rgb_encoder_->encode(rgb)[5], h, w);
        return out;
    }
    if (mode == ForwardMode::ThermalBranch) {
        if (!thermal_encoder_) throw ConfigError("forward: thermal branch requested with thermal disabled");
        out.s_thermal = dec_thermal_->forward(thermal_encoder_->encode(thermal)[5], h, w);
        return out;
    }

    const FeaturePyramid r = rgb_encoder_->encode(rgb);
    const FeaturePyramid t = thermal_encoder_ ? thermal_encoder_->encode(thermal) : zero_thermal(h, w);

    std::array<Tensor, 5> fused;
    for (std::size_t s = 2; s < 5; ++s) {
        fused[s] = cacr_[s - 2] ? cacr_forward(r.f[s], t.f[s], *cacr_[s - 2], config_.modality_order)
                                : run_bridge(stage_bridges_[s], concat_channels({r.f[s], t.f[s]}));
    }
    const Tensor g = gcm_ ? gcm_forward(fused[2], fused[3], fused[4], *gcm_)
                          : run_bridge(gcm_bridge_, aggregate_complementary(fused[2], fused[3], fused[4]));

    const bool decoders = mode == ForwardMode::Training || mode == ForwardMode::GcmBranch;
    if (decoders) {
        out.s_rgb = dec_rgb_->forward(r.f[4], h, w);
        if (dec_thermal_) out.s_thermal = dec_thermal_->forward(t.f[4], h, w);
        out.s_global = dec_global_->forward(g, h, w);
    }
    if (mode == ForwardMode::GcmBranch) return out;

    for (std::size_t s = 0; s < 2; ++s) {
        fused[s] = da_[s] ? da_forward(r.f[s], t.f[s], *da_[s])
                          : run_bridge(stage_bridges_[s], concat_channels({r.f[s], t.f[s]}));
    }
    if (arlm_) {
        StreamOutputs stream = arlm_->run(g, fused[4], fused[3], fused[2], fused[1], fused[0], h, w);
        stream.s_rgb = out.s_rgb;
        stream.s_thermal = out.s_thermal;
        stream.s_global = out.s_global;
        return stream;
    }
    out.p4 = head_->forward(g, h, w);
    return out;
}

Tensor CaiNet::predict_logits(const Tensor& rgb, const Tensor& thermal) const {
    NoGradGuard guard;
    return forward(rgb, thermal, ForwardMode::Inference).p4;
}

LabelMap CaiNet::predict(const Tensor& rgb, const Tensor& thermal) const {
    return argmax_labels(predict_logits(rgb, thermal));
}

ParameterReport CaiNet::parameter_report() const {
    ParameterReport rep;
    for (const auto& [name, p] : store_.all()) {
        std::string group = name.substr(0, name.find('.'));
        if (group == "decoder") group = name.substr(0, name.find('.', 8));
        const std::size_t n = p.tensor.numel();
        rep.total += n;
        if (group.rfind("decoder", 0) != 0) rep.inference += n;
        auto it = std::find_if(rep.groups.begin(), rep.groups.end(), [&](const auto& g) { return g.first == group; });
        if (it == rep.groups.end())
            rep.groups.emplace_back(group, n);
        else
            it->second += n;
    }
    return rep;
}

LabelMap argmax_labels(const Tensor& logits) {
    if (logits.rank() != 3) throw DimensionError("argmax_labels: expected K x H x W, got " + shape_str(logits.shape()));
    const std::size_t k = logits.dim(0), h = logits.dim(1), w = logits.dim(2), hw = h * w;
    LabelMap out(h, w);
    const float* x = logits.ptr();
    for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (x[c * hw + p] > x[best * hw + p]) best = c;
        out.values[p] = static_cast<std::int32_t>(best);
    }
    return out;
}

}  // namespace cainet
