#include <doctest.h>

#include <random>

#include "care/kernels.hpp"

using namespace care;
using namespace care::kernels;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (auto& x : m.data) x = u(gen);
  return m;
}

// Textbook triple loop on explicitly transposed copies.
Matrix naive_gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b,
                  double beta, const Matrix& c) {
  auto t = [](const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
  };
  const Matrix A = ta == Trans::Yes ? t(a) : a;
  const Matrix B = tb == Trans::Yes ? t(b) : b;
  Matrix out = c;
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < B.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < A.cols; ++k) s += A(i, k) * B(k, j);
      out(i, j) = alpha * s + beta * c(i, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("gemm matches a naive triple loop for every transpose combination") {
  std::mt19937_64 gen(1);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t m = 1 + gen() % 70, n = 1 + gen() % 70, k = 1 + gen() % 70;
    for (auto ta : {Trans::No, Trans::Yes}) {
      for (auto tb : {Trans::No, Trans::Yes}) {
        const auto a = ta == Trans::No ? random_matrix(gen, m, k) : random_matrix(gen, k, m);
        const auto b = tb == Trans::No ? random_matrix(gen, k, n) : random_matrix(gen, n, k);
        const auto c0 = random_matrix(gen, m, n);
        const double alpha = 0.7, beta = rep % 2 ? 0.0 : -1.3;
        const auto want = naive_gemm(ta, tb, alpha, a, b, beta, c0);
        Matrix s = c0, p = c0, d = c0;
        serial::gemm(ta, tb, alpha, a, b, beta, s);
        parallel::gemm(ta, tb, alpha, a, b, beta, p);
        kernels::gemm(ta, tb, alpha, a, b, beta, d);
        for (std::size_t i = 0; i < want.size(); ++i) {
          CHECK(s.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
        }
        CHECK(s == p);  // bitwise
        CHECK(s == d);
      }
    }
  }
}

TEST_CASE("beta = 0 ignores non-finite garbage in C") {
  Matrix a(2, 2, 1.0), b(2, 2, 1.0), c(2, 2, std::numeric_limits<double>::quiet_NaN());
  serial::gemm(Trans::No, Trans::No, 1.0, a, b, 0.0, c);
  CHECK(c == Matrix(2, 2, 2.0));
}

TEST_CASE("dot_scan: serial and parallel agree bitwise") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (std::size_t rows : {0u, 1u, 7u, 500u, 5000u}) {
    const std::size_t dim = 64;
    std::vector<float> q(dim), data(rows * dim);
    for (auto& x : q) x = u(gen);
    for (auto& x : data) x = u(gen);
    std::vector<double> s(rows), p(rows), d(rows);
    serial::dot_scan(q, data, dim, s);
    parallel::dot_scan(q, data, dim, p);
    kernels::dot_scan(q, data, dim, d);
    CHECK(s == p);
    CHECK(s == d);
    for (std::size_t r = 0; r < rows; r += 97) {
      double want = 0.0;
      for (std::size_t j = 0; j < dim; ++j) want += double(q[j]) * double(data[r * dim + j]);
      CHECK(s[r] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("matmul and vstack") {
  Matrix a(1, 2);
  a.data = {1, 2};
  Matrix b(2, 1);
  b.data = {3, 4};
  CHECK(matmul(a, b).data == std::vector<double>{11});
  CHECK(matmul(a, a, Trans::Yes, Trans::No).data == std::vector<double>{1, 2, 2, 4});
  const auto v = vstack(a, a);
  CHECK(v.rows == 2);
  CHECK(v.data == std::vector<double>{1, 2, 1, 2});
  CHECK(vstack(Matrix(0, 2), a) == a);
}
