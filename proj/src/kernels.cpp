#include "care/kernels.hpp"

#include <omp.h>

#include <string>
#include <vector>

#include "care/errors.hpp"

namespace care {

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols != b.cols) {
    throw ShapeMismatchError("vstack: column mismatch " +
                             std::to_string(a.cols) + " vs " +
                             std::to_string(b.cols));
  }
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

namespace kernels {

namespace {

struct GemmShape {
  std::size_t m, n, k;
};

GemmShape check_shape(Trans ta, Trans tb, const Matrix& a, const Matrix& b,
                      const Matrix& c) {
  const std::size_t m = ta == Trans::No ? a.rows : a.cols;
  const std::size_t k = ta == Trans::No ? a.cols : a.rows;
  const std::size_t kb = tb == Trans::No ? b.rows : b.cols;
  const std::size_t n = tb == Trans::No ? b.cols : b.rows;
  if (k != kb || c.rows != m || c.cols != n) {
    throw ShapeMismatchError("gemm: incompatible shapes (" +
                             std::to_string(m) + "x" + std::to_string(k) +
                             ") * (" + std::to_string(kb) + "x" +
                             std::to_string(n) + ") -> (" +
                             std::to_string(c.rows) + "x" +
                             std::to_string(c.cols) + ")");
  }
  return {m, n, k};
}

// Computes one output row. Shared by the serial and parallel drivers.
void gemm_row(std::size_t i, const GemmShape& s, Trans ta, Trans tb,
              double alpha, const Matrix& a, const Matrix& b, double beta,
              Matrix& c, std::vector<double>& acc) {
  acc.assign(s.n, 0.0);
  if (tb == Trans::No) {
    for (std::size_t p = 0; p < s.k; ++p) {
      const double av = ta == Trans::No ? a(i, p) : a(p, i);
      const double* brow = b.data.data() + p * b.cols;
      for (std::size_t j = 0; j < s.n; ++j) acc[j] += av * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < s.n; ++j) {
      const double* brow = b.data.data() + j * b.cols;
      double sum = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = ta == Trans::No ? a(i, p) : a(p, i);
        sum += av * brow[p];
      }
      acc[j] = sum;
    }
  }
  double* crow = c.data.data() + i * c.cols;
  for (std::size_t j = 0; j < s.n; ++j) {
    crow[j] = beta == 0.0 ? alpha * acc[j] : alpha * acc[j] + beta * crow[j];
  }
}

double dot_row(std::span<const float> query, const float* row) {
  double sum = 0.0;
  for (std::size_t d = 0; d < query.size(); ++d) {
    sum += static_cast<double>(query[d]) * static_cast<double>(row[d]);
  }
  return sum;
}

void check_scan(std::span<const float> query, std::span<const float> rows,
                std::size_t dim, std::span<double> out) {
  if (query.size() != dim || rows.size() != dim * out.size()) {
    throw ShapeMismatchError("dot_scan: expected " + std::to_string(out.size()) +
                             " rows of width " + std::to_string(dim));
  }
}

constexpr std::size_t kParallelGemmWork = 1 << 15;
constexpr std::size_t kParallelScanWork = 1 << 14;

}  // namespace

namespace serial {

void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c) {
  const GemmShape s = check_shape(ta, tb, a, b, c);
  std::vector<double> acc;
  for (std::size_t i = 0; i < s.m; ++i) {
    gemm_row(i, s, ta, tb, alpha, a, b, beta, c, acc);
  }
}

void dot_scan(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out) {
  check_scan(query, rows, dim, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = dot_row(query, rows.data() + i * dim);
  }
}

}  // namespace serial

namespace parallel {

void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c) {
  const GemmShape s = check_shape(ta, tb, a, b, c);
  const auto m = static_cast<std::ptrdiff_t>(s.m);
#pragma omp parallel
  {
    std::vector<double> acc;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
      gemm_row(static_cast<std::size_t>(i), s, ta, tb, alpha, a, b, beta, c,
               acc);
    }
  }
}

void dot_scan(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out) {
  check_scan(query, rows, dim, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        dot_row(query, rows.data() + static_cast<std::size_t>(i) * dim);
  }
}

}  // namespace parallel

void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c) {
  const std::size_t inner = ta == Trans::No ? a.cols : a.rows;
  if (c.size() * inner >= kParallelGemmWork && !omp_in_parallel()) {
    parallel::gemm(ta, tb, alpha, a, b, beta, c);
  } else {
    serial::gemm(ta, tb, alpha, a, b, beta, c);
  }
}

void dot_scan(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out) {
  if (rows.size() >= kParallelScanWork && !omp_in_parallel()) {
    parallel::dot_scan(query, rows, dim, out);
  } else {
    serial::dot_scan(query, rows, dim, out);
  }
}

Matrix matmul(const Matrix& a, const Matrix& b, Trans ta, Trans tb) {
  const std::size_t m = ta == Trans::No ? a.rows : a.cols;
  const std::size_t n = tb == Trans::No ? b.cols : b.rows;
  Matrix c(m, n);
  gemm(ta, tb, 1.0, a, b, 0.0, c);
  return c;
}

}  // namespace kernels
}  // namespace care
