#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cainet/arlm.hpp"
#include "cainet/grid.hpp"

namespace cainet {

inline constexpr float kProbClamp = 1e-7f;

struct ClassWeights {
    std::vector<float> w;
    std::vector<double> source_frequencies;
};

/// w_c = 1 / ln(1.02 + p_c). Throws on negative or over-unit frequencies.
ClassWeights enet_class_weights(std::span<const double> freqs);

/// mean((pred - q)^2) - cov(pred, q) / (sqrt(var pred) * sqrt(var q) + eps),
/// population statistics. Differentiable in `pred` only.
Tensor attention_loss(const Tensor& pred, const Tensor& q, double eps = 1e-8);

enum class LovaszClasses { Present, All };

struct LovaszOptions {
    LovaszClasses classes = LovaszClasses::Present;
    bool ignore_unlabeled = false;  ///< drop pixels (and class) 0
};

/// Lovász extension of the per-class Jaccard loss on probabilities
/// (K x H x W), averaged over the selected class set.
Tensor lovasz_softmax_probs(const Tensor& probs, const LabelMap& labels, const LovaszOptions& options = {});
/// Same, starting from logits (softmax over the class axis first).
Tensor lovasz_softmax(const Tensor& logits, const LabelMap& labels, const LovaszOptions& options = {});

/// Jaccard-extension gradient for errors already sorted in decreasing order.
std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_foreground);

/// -(1/N) sum_i w[y_i] log softmax(logits)_i[y_i]. Empty `weights` means all
/// ones. With `ignore_unlabeled`, label-0 pixels are skipped and N counts the rest.
Tensor weighted_cross_entropy(const Tensor& logits, const LabelMap& labels, std::span<const float> weights = {},
                              bool ignore_unlabeled = false);

/// -(1/N) sum_i w[t_i] (t_i log p_i + (1 - t_i) log(1 - p_i)), p clamped to
/// [1e-7, 1 - 1e-7]. weights = {w_negative, w_positive}.
Tensor weighted_binary_cross_entropy(const Tensor& pred, const BinaryMap& target, std::array<float, 2> weights);

struct LossReport {
    double l_seg1 = 0, l_seg2 = 0, l_seg3 = 0, l_seg4 = 0;
    double l_target = 0;
    double l_att1 = 0, l_att2 = 0;
    double l_binary = 0, l_boundary = 0;
    double l_decoder = 0;
    double l_total = 0;

    /// "l_total= l_target= l_att1= l_att2= l_binary= l_boundary= l_decoder=" fields.
    std::string log_fields() const;
    LossReport& operator+=(const LossReport& other);
    LossReport scaled(double factor) const;
};

struct LossToggles {
    bool decoder = true;
    bool target = true;
    bool attention = true;
    bool binary = true;
    bool boundary = true;
};

struct LossWeights {
    ClassWeights seg;                 ///< for the weighted CE on P3, P4
    std::array<float, 2> binary{1, 1};
    std::array<float, 2> boundary{1, 1};
};

struct AuxTargets;

struct LossResult {
    Tensor total;  ///< differentiable scalar
    LossReport report;
};

/// Sums every supervised head present in `outputs`. Heads left undefined
/// (e.g. in partial training stages) and toggled-off terms contribute zero.
LossResult total_loss(const StreamOutputs& outputs, const LabelMap& labels, const AuxTargets& aux,
                      const LossWeights& weights, const LossToggles& toggles = {},
                      const LovaszOptions& lovasz = {});

/// Loss evaluations so far, process-wide. Inference must not move it.
std::size_t loss_evaluation_count();

}  // namespace cainet
