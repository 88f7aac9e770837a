#include "cainet/cacr.hpp"

#include "cainet/ops.hpp"

namespace cainet {

CacrParams CacrParams::create(ParameterStore& store, const std::string& prefix, std::size_t channels) {
    if (channels % 2 != 0) {
        throw ConfigError("cacr: channel count must be even, got " + std::to_string(channels));
    }
    const std::size_t n = channels, m = channels / 2;
    CacrParams p;
    p.w1 = store.create(prefix + ".w1", {n, channels, 1, 1}, Init::KaimingUniform, channels);
    p.w2 = store.create(prefix + ".w2", {m, channels, 1, 1}, Init::KaimingUniform, channels);
    p.fc1 = store.create(prefix + ".fc1", {n, n}, Init::KaimingUniform, n);
    p.fc2 = store.create(prefix + ".fc2", {m, m}, Init::KaimingUniform, m);
    return p;
}

std::pair<Tensor, Tensor> cacr_project(const Tensor& x_first, const Tensor& x_second, const CacrParams& params) {
    if (x_first.rank() != 3 || x_first.shape() != x_second.shape()) {
        throw DimensionError("cacr: modality shapes differ, " + shape_str(x_first.shape()) + " vs " +
                             shape_str(x_second.shape()));
    }
    const std::size_t c = x_first.dim(0);
    if (c % 2 != 0) throw ConfigError("cacr: channel count must be even, got " + std::to_string(c));
    const std::size_t d = x_first.dim(1) * x_first.dim(2);
    Tensor t1 = reshape(conv2d(x_first, params.w1), {params.w1.dim(0), d});
    Tensor t2 = reshape(conv2d(x_second, params.w2), {params.w2.dim(0), d});
    return {t1, t2};
}

Tensor interaction_correlation(const Tensor& t1, const Tensor& t2) {
    if (t1.rank() != 2 || t2.rank() != 2 || t1.dim(1) != t2.dim(1)) {
        throw DimensionError("interaction_correlation: pixel counts differ, t1 " + shape_str(t1.shape()) + " vs t2 " +
                             shape_str(t2.shape()));
    }
    const float norm = 1.0f / static_cast<float>(t1.dim(0) * t2.dim(0));
    return scale(matmul(t2, transpose(t1)), norm);
}

Tensor complementary_reasoning(const Tensor& i_corr, const CacrParams& params) {
    Tensor inner = relu(add(matmul(i_corr, params.fc1), i_corr));
    return relu(matmul(params.fc2, inner));
}

Tensor cacr_reconstruct(const Tensor& x_sum, const Tensor& t2, const Tensor& cr_prime) {
    if (x_sum.rank() != 3 || cr_prime.rank() != 2 || t2.rank() != 2 || cr_prime.dim(0) != t2.dim(0) ||
        cr_prime.dim(1) != x_sum.dim(0) || t2.dim(1) != x_sum.dim(1) * x_sum.dim(2)) {
        throw DimensionError("cacr_reconstruct: extents do not match, x " + shape_str(x_sum.shape()) + ", t2 " +
                             shape_str(t2.shape()) + ", cr' " + shape_str(cr_prime.shape()));
    }
    Tensor complement = matmul(transpose(cr_prime), t2);
    return add(x_sum, reshape(complement, x_sum.shape()));
}

Tensor cacr_forward(const Tensor& f_rgb, const Tensor& f_thermal, const CacrParams& params, ModalityOrder order,
                    InteractionSpace* space) {
    const bool rgb_first = order == ModalityOrder::RgbFirst;
    auto [t1, t2] = cacr_project(rgb_first ? f_rgb : f_thermal, rgb_first ? f_thermal : f_rgb, params);
    Tensor i_corr = interaction_correlation(t1, t2);
    Tensor cr_prime = complementary_reasoning(i_corr, params);
    if (space) *space = {t1, t2, i_corr};
    return cacr_reconstruct(add(f_rgb, f_thermal), t2, cr_prime);
}

Tensor cacr_forward(const Tensor& f_rgb, const Tensor& f_thermal, const CacrParams& params, ModalityOrder order) {
    return cacr_forward(f_rgb, f_thermal, params, order, nullptr);
}

}  // namespace cainet
