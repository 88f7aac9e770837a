#include "cainet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cainet {

Tensor finite_difference_gradient(const std::function<double()>& f, Tensor param, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_difference_gradient: eps must be positive");
    NoGradGuard guard;
    Tensor out = Tensor::zeros(param.shape());
    auto values = param.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float saved = values[i];
        const float hi = static_cast<float>(saved + eps), lo = static_cast<float>(saved - eps);
        values[i] = hi;
        const double plus = f();
        values[i] = lo;
        const double minus = f();
        values[i] = saved;
        // Divide by the step actually taken in float.
        out[i] = static_cast<float>((plus - minus) / (double(hi) - double(lo)));
    }
    return out;
}

double relative_error(std::span<const float> analytic, std::span<const float> numeric) {
    if (analytic.size() != numeric.size()) throw DimensionError("relative_error: size mismatch");
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(double(analytic[i]) - numeric[i]));
        scale = std::max({scale, std::abs(double(analytic[i])), std::abs(double(numeric[i]))});
    }
    return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace cainet
