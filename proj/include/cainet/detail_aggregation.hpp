#pragma once

#include <string>

#include "cainet/parameter.hpp"

namespace cainet {

struct DaParams {
    Tensor dw_weight;     ///< 2C x 1 x 3 x 3 depthwise part of the combine path
    Tensor pw_weight;     ///< C x 2C x 1 x 1 pointwise part
    Tensor spatial7;      ///< 1 x 1 x 7 x 7
    Tensor spatial7_bias; ///< 1
    Tensor ca_fc1, ca_fc1_bias;  ///< C/r x C
    Tensor ca_fc2, ca_fc2_bias;  ///< C x C/r

    static DaParams create(ParameterStore& store, const std::string& prefix, std::size_t channels,
                           std::size_t reduction);
};

/// concat(f_rgb, f_thermal) -> depthwise-separable conv back to C channels.
Tensor combine_modalities(const Tensor& f_rgb, const Tensor& f_thermal, const DaParams& params);

/// Channel-axis max pooling then a 7x7 conv: C x H x W -> 1 x H x W.
Tensor spatial_cue(const Tensor& f_thermal, const DaParams& params);

/// Squeeze-excitation gate: x * sigmoid(fc2(ReLU(fc1(avgpool(x))))).
Tensor channel_attention(const Tensor& x, const DaParams& params);

/// The per-channel gate values channel_attention multiplies by.
Tensor channel_attention_scales(const Tensor& x, const DaParams& params);

/// d = CA(fc * ReLU(fc + ts) + f_thermal) with fc the combined features and
/// ts the thermal spatial cue broadcast over channels.
Tensor da_forward(const Tensor& f_rgb, const Tensor& f_thermal, const DaParams& params);

}  // namespace cainet
