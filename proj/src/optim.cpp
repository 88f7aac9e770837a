#include "cainet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cainet {

void adam_step(Parameter& param, const AdamOptions& o) {
    if (!(o.lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
    Tensor& t = param.tensor;
    if (!t.has_grad()) return;
    auto& st = param.adam;
    if (st.m.size() != t.numel()) {
        st.m.assign(t.numel(), 0.0f);
        st.v.assign(t.numel(), 0.0f);
    }
    st.step += 1;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.step));
    auto g = t.grad();
    auto w = t.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double m = o.beta1 * st.m[i] + (1.0 - o.beta1) * gi;
        const double v = o.beta2 * st.v[i] + (1.0 - o.beta2) * gi * gi;
        st.m[i] = static_cast<float>(m);
        st.v[i] = static_cast<float>(v);
        const double mhat = m / c1;
        const double vhat = v / c2;
        w[i] = static_cast<float>(w[i] - o.lr * mhat / (std::sqrt(vhat) + o.eps));
    }
    t.zero_grad();
}

void adam_step(ParameterStore& params, const AdamOptions& options) {
    if (!(options.lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
    for (auto& [_, p] : params.all()) adam_step(p, options);
}

}  // namespace cainet
