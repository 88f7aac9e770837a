#include "cainet/parameter.hpp"

#include <cmath>
#include <stdexcept>

namespace cainet {

Tensor ParameterStore::create(const std::string& name, Shape shape, Init init, std::size_t fan_in) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Tensor t = Tensor::zeros(shape, true);
    switch (init) {
        case Init::Zeros:
            break;
        case Init::KaimingUniform: {
            if (fan_in == 0) throw std::invalid_argument("kaiming init needs a fan-in for " + name);
            const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in)));
            std::uniform_real_distribution<float> dist(-bound, bound);
            for (float& v : t.data()) v = dist(rng_);
            break;
        }
        case Init::Identity: {
            if (shape.size() < 2 || shape[0] != shape[1]) {
                throw std::invalid_argument("identity init needs a square leading block for " + name);
            }
            const std::size_t inner = shape_numel(shape) / (shape[0] * shape[1]);
            const std::size_t center = inner / 2;
            for (std::size_t i = 0; i < shape[0]; ++i) t[(i * shape[1] + i) * inner + center] = 1.0f;
            break;
        }
    }
    Parameter p{name, t, {}};
    p.adam.m.assign(t.numel(), 0.0f);
    p.adam.v.assign(t.numel(), 0.0f);
    params_.emplace(name, std::move(p));
    return t;
}

Parameter& ParameterStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

const Parameter& ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::size_t ParameterStore::count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.tensor.numel();
    return n;
}

std::size_t ParameterStore::count_with_prefix(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_)
        if (name.rfind(prefix, 0) == 0) n += p.tensor.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& [_, p] : params_) p.tensor.zero_grad();
}

}  // namespace cainet
