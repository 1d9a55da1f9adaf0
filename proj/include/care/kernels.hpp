#pragma once

// Dense numeric kernels. Each kernel has a serial reference and an OpenMP
// version; both perform the same arithmetic in the same order per output
// element, so their results are bitwise identical and tests compare them
// exactly.

#include <cstddef>
#include <span>

#include "care/tensor.hpp"

namespace care::kernels {

enum class Trans { No, Yes };

namespace serial {

/// C = alpha * op(A) * op(B) + beta * C. C must already have the result shape.
void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c);

/// out[i] = <query, rows[i*dim .. (i+1)*dim)>, accumulated in double.
void dot_scan(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out);

}  // namespace serial

namespace parallel {

void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c);

void dot_scan(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out);

}  // namespace parallel

// Dispatchers used by library code: parallel above a work threshold.
void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c);
void dot_scan(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out);

/// Convenience: returns op(A) * op(B).
Matrix matmul(const Matrix& a, const Matrix& b, Trans ta = Trans::No,
              Trans tb = Trans::No);

}  // namespace care::kernels
