#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cainet/tensor.hpp"

namespace cainet {

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t step = 0;
};

/// A learnable tensor addressed by a dotted path such as "cacr.stage3.w1".
struct Parameter {
    std::string name;
    Tensor tensor;
    AdamState adam;
};

enum class Init { KaimingUniform, Zeros, Identity };

/// Owns every parameter of a model, ordered by name.
///
/// Entries are stable in memory, so modules may keep Tensor handles to them.
/// Initialization draws from a single seeded engine in creation order.
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

    /// Creates a parameter. Kaiming-uniform draws from U(-b, b), b = sqrt(6 / fan_in).
    Tensor create(const std::string& name, Shape shape, Init init, std::size_t fan_in = 0);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;

    std::map<std::string, Parameter>& all() { return params_; }
    const std::map<std::string, Parameter>& all() const { return params_; }

    std::size_t count() const;
    std::size_t count_with_prefix(const std::string& prefix) const;
    void zero_grad();

    std::mt19937_64& rng() { return rng_; }

private:
    std::map<std::string, Parameter> params_;
    std::mt19937_64 rng_;
};

}  // namespace cainet
