#pragma once

#include <functional>

#include "sdn/tensor.hpp"

namespace sdn {

using ScalarFn = std::function<double(const Tensor&)>;

// Central-difference gradient of a scalar function at `point`:
// component i is (fun(point + h e_i) - fun(point - h e_i)) / (2h).
// Throws EvaluationError if fun returns a non-finite value.
Tensor finite_diff_grad(const ScalarFn& fun, const Tensor& point, double h);

}  // namespace sdn
