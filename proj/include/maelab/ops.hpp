#pragma once

#include <vector>

#include "maelab/tensor.hpp"

namespace maelab::ops {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor abs_val(const Tensor& a);
// a^p elementwise. p == 0 yields a constant ones tensor (zero gradient).
Tensor pow_scalar(const Tensor& a, double p);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor gelu(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
// a[m,k] * b[n,k]^T without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// x[m,k] * w[k,n] + b[1,n] in one tape node.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, int rows, int cols);

// Row-wise softmax / layer normalisation (no affine; compose with
// mul_rowvec/add_rowvec for learnable scale and shift).
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);
// Layer normalisation with learnable gain/shift fused into one node.
Tensor layer_norm_affine(const Tensor& a, const Tensor& gain, const Tensor& shift,
                         double eps = 1e-5);

// Broadcast a [1, n] vector across the rows of a [m, n] matrix.
Tensor mul_rowvec(const Tensor& a, const Tensor& v);
Tensor add_rowvec(const Tensor& a, const Tensor& v);

Tensor sum_all(const Tensor& a);   // -> [1, 1]
Tensor mean_all(const Tensor& a);  // -> [1, 1]
// Column-wise mean over rows: [m, n] -> [1, n].
Tensor mean_over_rows(const Tensor& a);

// Row selection by index (duplicates allowed); gradient scatter-adds.
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int start, int len);
// Tile a [1, n] row m times.
Tensor repeat_row(const Tensor& a, int m);

}  // namespace maelab::ops
