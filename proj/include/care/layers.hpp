#pragma once

// Forward/backward primitives for the encoder, fusion and heads. Backward
// functions accumulate (+=) into parameter gradients and overwrite input
// gradients.

#include <cstddef>
#include <vector>

#include "care/tensor.hpp"

namespace care::nn {

/// y = x W (+ b, a 1 x out row broadcast over rows).
Matrix linear(const Matrix& x, const Matrix& w, const Matrix* b = nullptr);

/// dx = dy W^T (if dx), dW += x^T dy (if dw), db += colsum(dy) (if db).
void linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     Matrix* dx, Matrix* dw, Matrix* db);

/// Low-rank adapted projection y = x W + scale * (x A) B, with W frozen.
struct LoraCache {
  Matrix xa;  // x A
};
Matrix lora_linear(const Matrix& x, const Matrix& w, const Matrix& a,
                   const Matrix& b, double scale, LoraCache* cache);
/// Accumulates dA, dB; dx += contributions from both paths (dx is overwritten).
void lora_linear_backward(const Matrix& x, const Matrix& w, const Matrix& a,
                          const Matrix& b, double scale, const LoraCache& cache,
                          const Matrix& dy, Matrix* dx, Matrix& da, Matrix& db);

/// Row-wise layer normalization without affine parameters.
struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};
Matrix layer_norm(const Matrix& x, LayerNormCache* cache, double eps = 1e-5);
Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dy);

/// tanh-approximated GELU.
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

/// In-place numerically stable softmax over each row.
void softmax_rows(Matrix& m);

/// Multi-head scaled dot-product attention of q (Lq x d) over k, v (Lk x d).
/// No masking and no positional terms: output is invariant to permuting the
/// key/value rows together.
struct AttentionCache {
  std::vector<Matrix> probs;  // per head, Lq x Lk
};
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t heads, AttentionCache* cache);
void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                        std::size_t heads, const AttentionCache& cache,
                        const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv);

void add_inplace(Matrix& a, const Matrix& b);
Matrix mean_rows(const Matrix& x);

}  // namespace care::nn
