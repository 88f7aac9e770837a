#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cainet/tensor.hpp"

namespace cainet {

/// Central differences of `f` with respect to every element of `param`.
/// `f` is evaluated with tape recording disabled; `param` is restored.
Tensor finite_difference_gradient(const std::function<double()>& f, Tensor param, double eps = 1e-3);

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|); zero when both vanish.
double relative_error(std::span<const float> analytic, std::span<const float> numeric);

/// Contracts each tensor returned by `outputs` with fixed random weights in
/// U(-1, 1) (scalars get weight 1) and sums in double. The analytic gradient
/// of that contraction for every tensor in `wrt` is compared against finite
/// differences at steps eps, eps / 4 and eps / 16 (central and one-sided, closest
/// candidate per coordinate). Returns relative_error over the concatenation of
/// all `wrt` gradients. `wrt` tensors are marked as requiring grad.
double check_gradients(const std::function<std::vector<Tensor>()>& outputs, const std::vector<Tensor>& wrt,
                       double eps, std::uint64_t seed = 0);

/// A named composite whose gradients are checked on a seeded random instance.
struct GradcheckCase {
    std::string name;
    std::function<double(std::uint64_t seed)> run;  ///< worst relative error
};

struct GradcheckLine {
    std::string name;
    double worst = 0.0;
    bool pass = false;
};

/// One case per module composite and per loss, on small random shapes.
std::vector<GradcheckCase> module_gradchecks();

/// Runs every case on `instances` seeds (seed, seed + 1, ...). A case whose
/// run throws is reported as failing with an infinite error.
std::vector<GradcheckLine> run_gradchecks(const std::vector<GradcheckCase>& cases, std::size_t instances = 5,
                                          double tolerance = 1e-3, std::uint64_t seed = 1);

/// "gradcheck module=<name> worst_rel_err=<e> result=PASS|FAIL" per line.
std::string gradcheck_report(const std::vector<GradcheckLine>& lines);

}  // namespace cainet
