#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tagclip/tensor.hpp"

namespace tagclip {

// Matrix products. Shapes are checked and mismatches raise ShapeError.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// x·w + b with b added to every row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
/// 1 - x
Tensor one_minus(const Tensor& x);

// Row-wise broadcasting on matrices.
/// x[m×n] + b[n] on every row.
Tensor add_row_bias(const Tensor& x, const Tensor& b);
/// x[m×n] ⊙ r[n] (or r[1×n]) on every row.
Tensor mul_row(const Tensor& x, const Tensor& r);
/// Multiplies slice i of x along axis 0 by s[i]; x has any rank ≥ 1.
Tensor scale_rows(const Tensor& x, const Tensor& s);
/// r[n] or r[1×n] repeated into an m×n matrix.
Tensor repeat_row(const Tensor& r, std::size_t m);

// Nonlinearities.
Tensor sigmoid(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor log(const Tensor& x);
/// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);
/// x^p for x ≥ 0.
Tensor pow_scalar(const Tensor& x, double p);

/// Per-row standardization (biased variance) followed by gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sums each slice along axis 0; result has shape [dim(0)].
Tensor sum_rows(const Tensor& x);

// Structural ops. "Rows" always means slices along axis 0.
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Concatenation along axis 0; trailing extents must agree.
Tensor concat_rows(const std::vector<Tensor>& parts);
/// Concatenation of matrices along axis 1; row counts must agree.
Tensor concat_cols(const std::vector<Tensor>& parts);

}  // namespace tagclip
