#include "cainet/gcm.hpp"

#include "cainet/ops.hpp"

namespace cainet {

GcmParams GcmParams::create(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                            std::size_t channels) {
    GcmParams p;
    p.reduce1 = store.create(prefix + ".reduce1", {channels, in_channels, 1, 1}, Init::KaimingUniform, in_channels);
    p.reduce2 = store.create(prefix + ".reduce2", {channels, in_channels, 1, 1}, Init::KaimingUniform, in_channels);
    p.reduce3 = store.create(prefix + ".reduce3", {channels, in_channels, 1, 1}, Init::KaimingUniform, in_channels);
    p.conv1d_a = store.create(prefix + ".conv1d_a", {channels, channels}, Init::KaimingUniform, channels);
    p.conv1d_b = store.create(prefix + ".conv1d_b", {channels, channels}, Init::KaimingUniform, channels);
    return p;
}

Tensor aggregate_complementary(const Tensor& cr3, const Tensor& cr4, const Tensor& cr5) {
    const std::size_t h = cr4.dim(1), w = cr4.dim(2);
    return concat_channels({bilinear_resize(cr3, h, w), cr4, bilinear_resize(cr5, h, w)});
}

Tensor channel_affinity(const Tensor& crc, const GcmParams& params) {
    const std::size_t d = crc.dim(1) * crc.dim(2);
    Tensor p = reshape(conv2d(crc, params.reduce1), {params.reduce1.dim(0), d});
    Tensor q = reshape(conv2d(crc, params.reduce2), {params.reduce2.dim(0), d});
    return matmul(p, transpose(q));
}

Tensor global_softmax(const Tensor& a) {
    return reshape(softmax_axis(reshape(a, {1, a.numel()}), 1), a.shape());
}

Tensor relationship_modeling(const Tensor& a, const GcmParams& params) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
        throw DimensionError("relationship_modeling: affinity must be square, got " + shape_str(a.shape()));
    }
    Tensor rows = softmax_axis(a, 1);
    return add(matmul(params.conv1d_a, rows), global_softmax(a));
}

Tensor global_context(const Tensor& crc, const Tensor& rm, const GcmParams& params) {
    const std::size_t c = params.reduce3.dim(0);
    if (rm.rank() != 2 || rm.dim(0) != c || rm.dim(1) != c) {
        throw DimensionError("global_context: relationship matrix " + shape_str(rm.shape()) + " for " +
                             std::to_string(c) + " channels");
    }
    const std::size_t h = crc.dim(1), w = crc.dim(2);
    Tensor v = reshape(conv2d(crc, params.reduce3), {c, h * w});
    return reshape(matmul(matmul(params.conv1d_b, rm), v), {c, h, w});
}

Tensor gcm_forward(const Tensor& cr3, const Tensor& cr4, const Tensor& cr5, const GcmParams& params,
                   ChannelAffinity* affinity) {
    Tensor crc = aggregate_complementary(cr3, cr4, cr5);
    Tensor a = channel_affinity(crc, params);
    Tensor rm = relationship_modeling(a, params);
    if (affinity) *affinity = {a, rm};
    return global_context(crc, rm, params);
}

}  // namespace cainet
