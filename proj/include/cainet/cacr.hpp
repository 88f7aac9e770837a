#pragma once

#include <string>

#include "cainet/parameter.hpp"

namespace cainet {

/// Which modality feeds the C-row projection T1; the other feeds the C/2-row T2.
enum class ModalityOrder { RgbFirst, ThermalFirst };

/// Flattened channel x pixel matrices plus their size-normalized correlation.
struct InteractionSpace {
    Tensor t1;      ///< N x D, N = C
    Tensor t2;      ///< M x D, M = C / 2
    Tensor i_corr;  ///< M x N
};

struct CacrParams {
    Tensor w1;   ///< N x C x 1 x 1
    Tensor w2;   ///< M x C x 1 x 1
    Tensor fc1;  ///< N x N, mixes along N
    Tensor fc2;  ///< M x M, mixes along M

    /// Registers cacr.<stage>.{w1,w2,fc1,fc2}. Throws ConfigError for odd C.
    static CacrParams create(ParameterStore& store, const std::string& prefix, std::size_t channels);
};

/// t1 = flatten(conv1x1(x_first; w1)), t2 = flatten(conv1x1(x_second; w2)).
std::pair<Tensor, Tensor> cacr_project(const Tensor& x_first, const Tensor& x_second, const CacrParams& params);

/// i_corr[m, n] = sum_d t2[m, d] * t1[n, d] / (N * M).
Tensor interaction_correlation(const Tensor& t1, const Tensor& t2);

/// ReLU(FC2 . ReLU(i_corr . FC1 + i_corr)).
Tensor complementary_reasoning(const Tensor& i_corr, const CacrParams& params);

/// x_sum + reshape(cr_prime^T . t2). The literal Flatten(T1)^T * CR' product
/// does not close dimensionally for N = C, M = C/2; transpose(CR') . T2 is the
/// parameter-free reading that yields C channels for the residual.
Tensor cacr_reconstruct(const Tensor& x_sum, const Tensor& t2, const Tensor& cr_prime);

/// Full module: project -> correlate -> reason -> reconstruct, residual input
/// f_rgb + f_thermal.
Tensor cacr_forward(const Tensor& f_rgb, const Tensor& f_thermal, const CacrParams& params,
                    ModalityOrder order = ModalityOrder::RgbFirst);

/// Same as cacr_forward but also returns the interaction space.
Tensor cacr_forward(const Tensor& f_rgb, const Tensor& f_thermal, const CacrParams& params, ModalityOrder order,
                    InteractionSpace* space);

}  // namespace cainet
