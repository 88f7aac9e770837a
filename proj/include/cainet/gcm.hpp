#pragma once

#include <string>

#include "cainet/parameter.hpp"

namespace cainet {

struct GcmParams {
    Tensor reduce1;   ///< c x Cc x 1 x 1, first affinity branch
    Tensor reduce2;   ///< c x Cc x 1 x 1, second affinity branch
    Tensor reduce3;   ///< c x Cc x 1 x 1, value branch
    Tensor conv1d_a;  ///< c x c, applied to the row-softmaxed affinity
    Tensor conv1d_b;  ///< c x c, applied to the relationship matrix

    static GcmParams create(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                            std::size_t channels);
};

struct ChannelAffinity {
    Tensor a;   ///< c x c
    Tensor rm;  ///< c x c
};

/// Resizes cr3 (and cr5 if needed) to cr4's extents and concatenates (cr3, cr4, cr5).
Tensor aggregate_complementary(const Tensor& cr3, const Tensor& cr4, const Tensor& cr5);

/// a = P . Q^T with P, Q the two 1x1 reductions of crc flattened to c x D.
Tensor channel_affinity(const Tensor& crc, const GcmParams& params);

/// conv1d_a(softmax over each row of a) + exp(a) / sum(exp(a)).
Tensor relationship_modeling(const Tensor& a, const GcmParams& params);

/// The global-softmax half of relationship_modeling on its own.
Tensor global_softmax(const Tensor& a);

/// g = reshape(conv1d_b(rm) . V, c x H4 x W4), V the value reduction of crc.
/// Emitted as a channel-major feature map (rm . V) rather than the literal
/// transposed D x c product so it can feed the decoder stream directly.
Tensor global_context(const Tensor& crc, const Tensor& rm, const GcmParams& params);

/// aggregate -> affinity -> relationship -> global context.
Tensor gcm_forward(const Tensor& cr3, const Tensor& cr4, const Tensor& cr5, const GcmParams& params,
                   ChannelAffinity* affinity = nullptr);

}  // namespace cainet
