#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "tagclip/gradcheck.hpp"
#include "tagclip/tensor.hpp"

namespace testutil {

inline tagclip::Tensor uniform(tagclip::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(tagclip::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return tagclip::Tensor::from(std::move(shape), std::move(v));
}

inline tagclip::Tensor param(tagclip::Tensor t) {
  t.set_requires_grad(true);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Analytic gradient of f at x against central differences.
template <class F>
double grad_error(F f, const tagclip::Tensor& x0) {
  tagclip::Tensor x = x0.detach();
  x.set_requires_grad(true);
  tagclip::backward(f(x));
  const auto analytic = x.grad();
  const auto numeric = tagclip::finite_diff_grad(
      [&](const tagclip::Tensor& p) {
        tagclip::NoGradGuard g;
        return f(p).item();
      },
      x0);
  std::vector<double> nv(numeric.values().begin(), numeric.values().end());
  return tagclip::relative_error(analytic, nv);
}

}  // namespace testutil
