#pragma once

#include <functional>
#include <vector>

#include "spandet/tensor.hpp"

namespace spandet {

using ScalarFn = std::function<Tensor(const Tensor&)>;
using ScalarFnN = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares the analytic gradient of a scalar function with central
/// differences of step eps (must lie in [1e-7, 1e-3]). Returns
/// max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

/// Same, over every coordinate of every input.
double grad_check(const ScalarFnN& f, const std::vector<Tensor>& xs, double eps = 1e-5);

}  // namespace spandet
