#include "cainet/detail_aggregation.hpp"

#include <algorithm>

#include "cainet/ops.hpp"

namespace cainet {

DaParams DaParams::create(ParameterStore& store, const std::string& prefix, std::size_t channels,
                          std::size_t reduction) {
    if (reduction == 0) throw ConfigError("da: reduction ratio must be >= 1");
    const std::size_t hidden = std::max<std::size_t>(1, channels / reduction);
    DaParams p;
    p.dw_weight = store.create(prefix + ".combine.dw", {2 * channels, 1, 3, 3}, Init::KaimingUniform, 9);
    p.pw_weight = store.create(prefix + ".combine.pw", {channels, 2 * channels, 1, 1}, Init::KaimingUniform,
                               2 * channels);
    p.spatial7 = store.create(prefix + ".spatial7.weight", {1, 1, 7, 7}, Init::KaimingUniform, 49);
    p.spatial7_bias = store.create(prefix + ".spatial7.bias", {1}, Init::Zeros);
    p.ca_fc1 = store.create(prefix + ".ca.fc1.weight", {hidden, channels}, Init::KaimingUniform, channels);
    p.ca_fc1_bias = store.create(prefix + ".ca.fc1.bias", {hidden}, Init::Zeros);
    p.ca_fc2 = store.create(prefix + ".ca.fc2.weight", {channels, hidden}, Init::KaimingUniform, hidden);
    p.ca_fc2_bias = store.create(prefix + ".ca.fc2.bias", {channels}, Init::Zeros);
    return p;
}

Tensor combine_modalities(const Tensor& f_rgb, const Tensor& f_thermal, const DaParams& params) {
    if (f_rgb.shape() != f_thermal.shape()) {
        throw DimensionError("combine_modalities: modality shapes differ, " + shape_str(f_rgb.shape()) + " vs " +
                             shape_str(f_thermal.shape()));
    }
    return depthwise_separable_conv(concat_channels({f_rgb, f_thermal}), params.dw_weight, params.pw_weight);
}

Tensor spatial_cue(const Tensor& f_thermal, const DaParams& params) {
    return conv2d(channel_max(f_thermal), params.spatial7, params.spatial7_bias, {1, 3});
}

Tensor channel_attention_scales(const Tensor& x, const DaParams& params) {
    Tensor squeezed = global_avg_pool(x);
    Tensor hidden = relu(linear(squeezed, params.ca_fc1, params.ca_fc1_bias));
    return sigmoid(linear(hidden, params.ca_fc2, params.ca_fc2_bias));
}

Tensor channel_attention(const Tensor& x, const DaParams& params) {
    return mul_channelwise(x, channel_attention_scales(x, params));
}

Tensor da_forward(const Tensor& f_rgb, const Tensor& f_thermal, const DaParams& params) {
    Tensor fc = combine_modalities(f_rgb, f_thermal, params);
    Tensor ts = spatial_cue(f_thermal, params);
    Tensor gated = mul(fc, relu(add_pixelwise(fc, ts)));
    return channel_attention(add(gated, f_thermal), params);
}

}  // namespace cainet
