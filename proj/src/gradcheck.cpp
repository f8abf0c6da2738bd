#include "tagclip/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tagclip {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  std::vector<double> base(x.values().begin(), x.values().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double fp = f(Tensor::from(x.shape(), std::move(plus)));
    const double fm = f(Tensor::from(x.shape(), std::move(minus)));
    out[i] = (fp - fm) / (2.0 * h);
  }
  return Tensor::from(x.shape(), std::move(out));
}

std::vector<double> finite_diff_grad_inplace(const std::function<double()>& f, Tensor& param,
                                             double h) {
  auto v = param.mutable_values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    v[i] = orig + h;
    const double fp = f();
    v[i] = orig - h;
    const double fm = f();
    v[i] = orig;
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace tagclip
