#pragma once

#include <functional>
#include <vector>

#include "tagclip/tensor.hpp"

namespace tagclip {

/// Central differences of f at x: (f(x + h·e_i) − f(x − h·e_i)) / 2h.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

/// Same, but perturbs the leaf `param` in place and evaluates a closure that
/// reads it. The original values are restored before returning.
std::vector<double> finite_diff_grad_inplace(const std::function<double()>& f, Tensor& param,
                                             double h = 1e-5);

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor).
double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                      double floor = 1e-8);

}  // namespace tagclip
