#include "care/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "care/errors.hpp"
#include "care/kernels.hpp"

namespace care::nn {

using kernels::Trans;

Matrix linear(const Matrix& x, const Matrix& w, const Matrix* b) {
  Matrix y(x.rows, w.cols);
  kernels::gemm(Trans::No, Trans::No, 1.0, x, w, 0.0, y);
  if (b != nullptr) {
    for (std::size_t r = 0; r < y.rows; ++r) {
      auto row = y.row(r);
      for (std::size_t c = 0; c < y.cols; ++c) row[c] += b->data[c];
    }
  }
  return y;
}

void linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     Matrix* dx, Matrix* dw, Matrix* db) {
  if (dx != nullptr) {
    *dx = Matrix(x.rows, x.cols);
    kernels::gemm(Trans::No, Trans::Yes, 1.0, dy, w, 0.0, *dx);
  }
  if (dw != nullptr) kernels::gemm(Trans::Yes, Trans::No, 1.0, x, dy, 1.0, *dw);
  if (db != nullptr) {
    for (std::size_t r = 0; r < dy.rows; ++r) {
      for (std::size_t c = 0; c < dy.cols; ++c) db->data[c] += dy(r, c);
    }
  }
}

Matrix lora_linear(const Matrix& x, const Matrix& w, const Matrix& a,
                   const Matrix& b, double scale, LoraCache* cache) {
  Matrix y = linear(x, w);
  Matrix xa = linear(x, a);
  kernels::gemm(Trans::No, Trans::No, scale, xa, b, 1.0, y);
  if (cache != nullptr) cache->xa = std::move(xa);
  return y;
}

void lora_linear_backward(const Matrix& x, const Matrix& w, const Matrix& a,
                          const Matrix& b, double scale, const LoraCache& cache,
                          const Matrix& dy, Matrix* dx, Matrix& da, Matrix& db) {
  // dB += scale * (xA)^T dy ; d(xA) = scale * dy B^T
  kernels::gemm(Trans::Yes, Trans::No, scale, cache.xa, dy, 1.0, db);
  Matrix dxa(dy.rows, b.rows);
  kernels::gemm(Trans::No, Trans::Yes, scale, dy, b, 0.0, dxa);
  kernels::gemm(Trans::Yes, Trans::No, 1.0, x, dxa, 1.0, da);
  if (dx != nullptr) {
    *dx = Matrix(x.rows, x.cols);
    kernels::gemm(Trans::No, Trans::Yes, 1.0, dy, w, 0.0, *dx);
    kernels::gemm(Trans::No, Trans::Yes, 1.0, dxa, a, 1.0, *dx);
  }
}

Matrix layer_norm(const Matrix& x, LayerNormCache* cache, double eps) {
  Matrix y(x.rows, x.cols);
  std::vector<double> inv(x.rows);
  const double n = static_cast<double>(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    inv[r] = 1.0 / std::sqrt(var + eps);
    auto out = y.row(r);
    for (std::size_t c = 0; c < x.cols; ++c) out[c] = (in[c] - mean) * inv[r];
  }
  if (cache != nullptr) {
    cache->xhat = y;
    cache->inv_std = std::move(inv);
  }
  return y;
}

Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dy) {
  const auto& xh = cache.xhat;
  Matrix dx(dy.rows, dy.cols);
  const double n = static_cast<double>(dy.cols);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t c = 0; c < dy.cols; ++c) {
      sum_dy += dy(r, c);
      sum_dy_xh += dy(r, c) * xh(r, c);
    }
    for (std::size_t c = 0; c < dy.cols; ++c) {
      dx(r, c) = cache.inv_std[r] *
                 (dy(r, c) - sum_dy / n - xh(r, c) * sum_dy_xh / n);
    }
  }
  return dx;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

Matrix gelu(const Matrix& x) {
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data[i];
    y.data[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
  }
  return y;
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  Matrix dx(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data[i];
    const double u = kGeluC * (v + 0.044715 * v * v * v);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
    dx.data[i] = dy.data[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
  }
  return dx;
}

void softmax_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

namespace {

// Columns [h*dh, (h+1)*dh) of m.
Matrix head_slice(const Matrix& m, std::size_t h, std::size_t dh) {
  Matrix out(m.rows, dh);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols + h * dh), dh,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * dh));
  }
  return out;
}

void head_store(Matrix& m, const Matrix& part, std::size_t h, std::size_t dh) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::copy_n(part.data.begin() + static_cast<std::ptrdiff_t>(r * dh), dh,
                m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols + h * dh));
  }
}

std::size_t head_width(const Matrix& q, std::size_t heads) {
  if (heads == 0 || q.cols % heads != 0) {
    throw ShapeMismatchError("attention width not divisible by head count");
  }
  return q.cols / heads;
}

}  // namespace

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t heads, AttentionCache* cache) {
  if (q.cols != k.cols || k.cols != v.cols || k.rows != v.rows) {
    throw ShapeMismatchError("attention: q/k/v widths or key/value lengths differ");
  }
  if (k.rows == 0) throw ShapeMismatchError("attention over an empty key set");
  const std::size_t dh = head_width(q, heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(q.rows, q.cols);
  if (cache != nullptr) cache->probs.assign(heads, Matrix());
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix qh = head_slice(q, h, dh);
    const Matrix kh = head_slice(k, h, dh);
    const Matrix vh = head_slice(v, h, dh);
    Matrix scores(q.rows, k.rows);
    kernels::gemm(Trans::No, Trans::Yes, scale, qh, kh, 0.0, scores);
    softmax_rows(scores);
    head_store(out, kernels::matmul(scores, vh), h, dh);
    if (cache != nullptr) cache->probs[h] = std::move(scores);
  }
  return out;
}

void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                        std::size_t heads, const AttentionCache& cache,
                        const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv) {
  const std::size_t dh = head_width(q, heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq = Matrix(q.rows, q.cols);
  dk = Matrix(k.rows, k.cols);
  dv = Matrix(v.rows, v.cols);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix& p = cache.probs[h];
    const Matrix qh = head_slice(q, h, dh);
    const Matrix kh = head_slice(k, h, dh);
    const Matrix vh = head_slice(v, h, dh);
    const Matrix doh = head_slice(dout, h, dh);
    // dV = P^T dO ; dP = dO V^T ; dS = P * (dP - rowsum(dP * P))
    head_store(dv, kernels::matmul(p, doh, Trans::Yes), h, dh);
    Matrix dp = kernels::matmul(doh, vh, Trans::No, Trans::Yes);
    for (std::size_t r = 0; r < p.rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < p.cols; ++c) dot += dp(r, c) * p(r, c);
      for (std::size_t c = 0; c < p.cols; ++c) dp(r, c) = p(r, c) * (dp(r, c) - dot);
    }
    Matrix dqh(q.rows, dh), dkh(k.rows, dh);
    kernels::gemm(Trans::No, Trans::No, scale, dp, kh, 0.0, dqh);
    kernels::gemm(Trans::Yes, Trans::No, scale, dp, qh, 0.0, dkh);
    head_store(dq, dqh, h, dh);
    head_store(dk, dkh, h, dh);
  }
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeMismatchError("add_inplace: shape mismatch");
  }
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

Matrix mean_rows(const Matrix& x) {
  Matrix out(1, x.cols);
  if (x.rows == 0) return out;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) out(0, c) += x(r, c);
  }
  for (double& v : out.data) v /= static_cast<double>(x.rows);
  return out;
}

}  // namespace care::nn
