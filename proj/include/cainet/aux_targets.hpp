#pragma once

#include <cstddef>

#include "cainet/grid.hpp"

namespace cainet {

struct AuxTargets {
    BinaryMap binary;
    BinaryMap boundary;
    FloatMap attention_q;
};

struct AuxTargetOptions {
    std::size_t dilation = 5;
    double sigma = 2.0;
};

BinaryMap binary_target(const LabelMap& labels);

/// k x k neighborhood max / min with zero padding. Even k throws ConfigError.
BinaryMap dilate(const BinaryMap& b, std::size_t k);
BinaryMap erode(const BinaryMap& b, std::size_t k);

/// Inner boundary: b AND NOT erode(b, 3).
BinaryMap boundary_target(const BinaryMap& binary);

/// Separable Gaussian, radius ceil(3 sigma), unit-sum kernel, reflect-101 padding.
FloatMap gaussian_blur(const FloatMap& x, double sigma);
std::vector<double> gaussian_kernel(double sigma);

/// clamp(blur(dilate(binary, dilation), sigma), 0, 1).
FloatMap attention_target(const BinaryMap& binary, const AuxTargetOptions& options = {});

AuxTargets make_aux_targets(const LabelMap& labels, const AuxTargetOptions& options = {});

/// Calls to make_aux_targets so far, process-wide.
std::size_t aux_target_count();

}  // namespace cainet
