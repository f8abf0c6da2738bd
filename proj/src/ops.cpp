#include "tagclip/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tagclip {

namespace {

using detail::Node;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

// Accumulate into parent i if it wants a gradient.
template <typename F>
void push_grad(Node& self, std::size_t i, F&& f) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return;
  f(p.grad_buffer());
}

std::size_t row_width(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("row op on a scalar");
  return x.dim(0) ? x.numel() / x.dim(0) : 0;
}

// Accepts [n] or [1×n].
std::size_t row_vector_len(const Tensor& r, const char* op) {
  if (r.rank() == 1) return r.dim(0);
  if (r.rank() == 2 && r.dim(0) == 1) return r.dim(1);
  throw ShapeError(std::string(op) + ": expected a row vector, got " + shape_str(r.shape()));
}

// c[m×n] += a[m×k] · b[k×n], fixed i-k-j order.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m×n] += a[m×k] · b[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += s;
    }
  }
}

// c[k×n] += a[m×k]ᵀ · b[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + i * n;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      const auto& xin = self.parents[0]->values;
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * deriv(xin[i], self.values[i]);
      }
    });
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ for " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* av = self.parents[0]->values.data();
    const double* bv = self.parents[1]->values.data();
    push_grad(self, 0, [&](std::vector<double>& g) {
      gemm_nt(self.grad.data(), bv, g.data(), m, n, k);
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      gemm_tn(av, self.grad.data(), g.data(), m, k, n);
    });
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_nt: inner extents differ for " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* av = self.parents[0]->values.data();
    const double* bv = self.parents[1]->values.data();
    // dA = G·B, dB = Gᵀ·A
    push_grad(self, 0, [&](std::vector<double>& g) {
      gemm_nn(self.grad.data(), bv, g.data(), m, n, k);
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      gemm_tn(self.grad.data(), av, g.data(), m, n, k);
    });
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    });
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_matrix(w, "linear");
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
    throw ShapeError("linear: bias " + shape_str(b.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  }
  return add_row_bias(matmul(x, w), b);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      push_grad(self, p, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      });
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    });
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same(a, b, "div");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& bv = self.parents[1]->values;
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / bv[i];
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.values[i] / bv[i];
    });
  });
}

Tensor scale(const Tensor& x, double s) {
  return unary(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor one_minus(const Tensor& x) {
  return unary(x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor add_row_bias(const Tensor& x, const Tensor& b) {
  require_matrix(x, "add_row_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row_vector_len(b, "add_row_bias") != n) {
    throw ShapeError("add_row_bias: bias " + shape_str(b.shape()) + " vs rows of " +
                     shape_str(x.shape()));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return Tensor::make_result(x.shape(), std::move(out), {x, b}, [m, n](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    });
  });
}

Tensor mul_row(const Tensor& x, const Tensor& r) {
  require_matrix(x, "mul_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row_vector_len(r, "mul_row") != n) {
    throw ShapeError("mul_row: row " + shape_str(r.shape()) + " vs " + shape_str(x.shape()));
  }
  std::vector<double> out(m * n);
  const auto xv = x.values();
  const auto rv = r.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * rv[j];
  return Tensor::make_result(x.shape(), std::move(out), {x, r}, [m, n](Node& self) {
    const auto& xin = self.parents[0]->values;
    const auto& rin = self.parents[1]->values;
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * rin[j];
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * xin[i * n + j];
    });
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  const std::size_t m = x.rank() ? x.dim(0) : 0;
  if (x.rank() == 0 || s.numel() != m) {
    throw ShapeError("scale_rows: " + shape_str(s.shape()) + " scales vs " + shape_str(x.shape()));
  }
  const std::size_t w = row_width(x);
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  const auto sv = s.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = sv[i] * xv[i * w + j];
  return Tensor::make_result(x.shape(), std::move(out), {x, s}, [m, w](Node& self) {
    const auto& xin = self.parents[0]->values;
    const auto& sin = self.parents[1]->values;
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * w + j] * sin[i];
    });
    push_grad(self, 1, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w; ++j) acc += self.grad[i * w + j] * xin[i * w + j];
        g[i] += acc;
      }
    });
  });
}

Tensor repeat_row(const Tensor& r, std::size_t m) {
  const std::size_t n = row_vector_len(r, "repeat_row");
  std::vector<double> out(m * n);
  const auto rv = r.values();
  for (std::size_t i = 0; i < m; ++i) std::copy(rv.begin(), rv.end(), out.begin() + i * n);
  return Tensor::make_result({m, n}, std::move(out), {r}, [m, n](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    });
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        // Branches keep exp() from overflowing for large |v|.
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = self.values.data() + i * n;
        const double* dy = self.grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot);
      }
    });
  });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor pow_scalar(const Tensor& x, double p) {
  return unary(
      x, [p](double v) { return std::pow(v, p); },
      [p](double v, double) {
        if (p == 0.0) return 0.0;
        if (v == 0.0) return p == 1.0 ? 1.0 : 0.0;
        return p * std::pow(v, p - 1.0);
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (n == 0) throw ShapeError("layer_norm: empty rows");
  if (gain.numel() != n || bias.numel() != n) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                     shape_str(bias.shape()) + " vs " + shape_str(x.shape()));
  }
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> inv_std(m);
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = self.parents[1]->values;
        push_grad(self, 0, [&](std::vector<double>& g) {
          const double nn = static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            // dx = inv_std/n · (n·dxhat − Σdxhat − xhat·Σ(dxhat⊙xhat))
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = self.grad[i * n + j] * gv[j];
              s1 += dxh;
              s2 += dxh * xhat[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = self.grad[i * n + j] * gv[j];
              g[i * n + j] += inv_std[i] / nn * (nn * dxh - s1 - xhat[i * n + j] * s2);
            }
          }
        });
        push_grad(self, 1, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * xhat[i * n + j];
        });
        push_grad(self, 2, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        });
      });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({}, {s}, {x}, [](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (auto& v : g) v += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_rows(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("sum_rows on a scalar");
  const std::size_t m = x.dim(0), w = row_width(x);
  std::vector<double> out(m, 0.0);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i] += xv[i * w + j];
  return Tensor::make_result({m}, std::move(out), {x}, [m, w](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i];
    });
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  Shape tail(parts[0].shape().begin() + (parts[0].rank() ? 1 : 0), parts[0].shape().end());
  if (parts[0].rank() == 0) throw ShapeError("concat_rows on a scalar");
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank() ||
        !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat_rows: " + shape_str(parts[0].shape()) + " and " +
                       shape_str(p.shape()) + " disagree past axis 0");
    }
    offsets.push_back(rows * shape_numel(tail));
    rows += p.dim(0);
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), parts,
                             [offsets](Node& self) {
                               for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                 push_grad(self, k, [&](std::vector<double>& g) {
                                   for (std::size_t i = 0; i < g.size(); ++i)
                                     g[i] += self.grad[offsets[k] + i];
                                 });
                               }
                             });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) { return concat_rows(std::vector{a, b}); }

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  for (const auto& p : parts) require_matrix(p, "concat_cols");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> col_offsets;
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != m) {
      throw ShapeError("concat_cols: row counts differ for " + shape_str(parts[0].shape()) +
                       " and " + shape_str(p.shape()));
    }
    col_offsets.push_back(n);
    n += p.dim(1);
  }
  std::vector<double> out(m * n);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].dim(1);
    const auto pv = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * n + col_offsets[k] + j] = pv[i * w + j];
  }
  return Tensor::make_result({m, n}, std::move(out), parts, [m, n, col_offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      push_grad(self, k, [&](std::vector<double>& g) {
        const std::size_t w = self.parents[k]->shape[1];
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * n + col_offsets[k] + j];
      });
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) { return concat_cols(std::vector{a, b}); }

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t w = row_width(x);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<double> out(x.values().begin() + begin * w, x.values().begin() + end * w);
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [begin, w](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * w + i] += self.grad[i];
    });
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin > end || end > n) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * n + begin + j];
  return Tensor::make_result({m, w}, std::move(out), {x}, [m, n, w, begin](Node& self) {
    push_grad(self, 0, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
    });
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (x.rank() == 0) throw ShapeError("gather_rows on a scalar");
  const std::size_t w = row_width(x);
  for (auto r : rows) {
    if (r >= x.dim(0)) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " +
                       shape_str(x.shape()));
    }
  }
  Shape shape = x.shape();
  shape[0] = rows.size();
  std::vector<double> out;
  out.reserve(rows.size() * w);
  const auto xv = x.values();
  for (auto r : rows) out.insert(out.end(), xv.begin() + r * w, xv.begin() + (r + 1) * w);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [w, idx = std::move(idx)](Node& self) {
                               push_grad(self, 0, [&](std::vector<double>& g) {
                                 for (std::size_t k = 0; k < idx.size(); ++k)
                                   for (std::size_t j = 0; j < w; ++j)
                                     g[idx[k] * w + j] += self.grad[k * w + j];
                               });
                             });
}

}  // namespace tagclip
