#pragma once

#include "cainet/parameter.hpp"

namespace cainet {

struct AdamOptions {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter, then zeroes grads.
void adam_step(ParameterStore& params, const AdamOptions& options);
void adam_step(Parameter& param, const AdamOptions& options);

}  // namespace cainet
