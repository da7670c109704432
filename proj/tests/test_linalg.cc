#include <cmath>
#include <limits>

#include "doctest.h"

#include "dln/error.hpp"
#include "dln/linalg.hpp"
#include "dln/random.hpp"
#include "oracles.hpp"

using namespace dln;

namespace {

double orthogonality_defect(const Matrix& q) {
  return frobenius_norm(matmul(transpose(q), q) - Matrix::identity(q.cols()));
}

}  // namespace

TEST_CASE("matrix construction rejects bad input") {
  CHECK_THROWS_AS(Matrix(0, 3, {}), Error);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), Error);
  CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
  CHECK_THROWS_AS(Matrix(1, 1, {std::numeric_limits<double>::infinity()}), Error);
  try {
    Matrix(1, 1, {std::nan("")});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
  }
  CHECK_NOTHROW(Matrix(1, 1, {4.0}));
  CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), Error);
}

TEST_CASE("matmul small cases") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{0}, {1}});
  CHECK(matmul(a, b) == Matrix::from_rows({{2}, {4}}));

  Rng rng(11);
  const Matrix m = oracle::random_matrix(rng, 3, 3);
  CHECK(matmul(Matrix::identity(3), m) == m);
  CHECK(matmul(m, Matrix::identity(3)) == m);

  try {
    matmul(a, Matrix::zeros(3, 1));
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("matmul agrees with the triple loop") {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
    const Matrix a = oracle::random_matrix(rng, m, k);
    const Matrix b = oracle::random_matrix(rng, k, n);
    CHECK(oracle::max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)) <= 1e-14 * (1 + k));
  }
  const Matrix a = oracle::random_matrix(rng, 5, 4);
  const Matrix b = oracle::random_matrix(rng, 4, 3);
  CHECK(oracle::max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)) <= 1e-14);
}

TEST_CASE("matmul is associative") {
  Rng rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t p = 1 + rng.below(12), q = 1 + rng.below(12), r = 1 + rng.below(12),
                      s = 1 + rng.below(12);
    const Matrix a = oracle::random_matrix(rng, p, q);
    const Matrix b = oracle::random_matrix(rng, q, r);
    const Matrix c = oracle::random_matrix(rng, r, s);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    const double scale = frobenius_norm(a) * frobenius_norm(b) * frobenius_norm(c);
    CHECK(frobenius_norm(left - right) <= 1e-12 * scale);
  }
}

TEST_CASE("frobenius inner product") {
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(frobenius_inner(Matrix::identity(2), m) == 5.0);
  CHECK(frobenius_inner(m, m) == doctest::Approx(30.0).epsilon(1e-15));
  CHECK(frobenius_norm(m) == doctest::Approx(std::sqrt(30.0)).epsilon(1e-15));
  CHECK_THROWS_AS(frobenius_inner(m, Matrix::zeros(2, 3)), Error);

  Rng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t r = 1 + rng.below(12), c = 1 + rng.below(12);
    const Matrix a = oracle::random_matrix(rng, r, c);
    const Matrix b = oracle::random_matrix(rng, r, c);
    const double ip = frobenius_inner(a, b);
    CHECK(ip == frobenius_inner(b, a));
    CHECK(std::abs(ip - oracle::trace_inner(a, b)) <= 1e-12 * (1 + frobenius_norm(a) * frobenius_norm(b)));
    CHECK(frobenius_inner(a, a) >= 0.0);
  }
}

TEST_CASE("adjoint identity <a, b c> = <b^T a, c>") {
  Rng rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 1 + rng.below(12), k = 1 + rng.below(12), n = 1 + rng.below(12);
    const Matrix a = oracle::random_matrix(rng, m, n);
    const Matrix b = oracle::random_matrix(rng, m, k);
    const Matrix c = oracle::random_matrix(rng, k, n);
    const double lhs = frobenius_inner(a, matmul(b, c));
    const double rhs = frobenius_inner(matmul(transpose(b), a), c);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1 + frobenius_norm(a) * frobenius_norm(b) * frobenius_norm(c)));
  }
}

TEST_CASE("outer, transpose and padded identity") {
  const Matrix u = Matrix::column({1, 2});
  const Matrix v = Matrix::column({3, 4, 5});
  CHECK(outer(u, v) == Matrix::from_rows({{3, 4, 5}, {6, 8, 10}}));
  CHECK(transpose(transpose(outer(u, v))) == outer(u, v));
  CHECK(Matrix::padded_identity(2, 3) == Matrix::from_rows({{1, 0, 0}, {0, 1, 0}}));
  CHECK(Matrix::padded_identity(3, 1) == Matrix::column({1, 0, 0}));
  CHECK_THROWS_AS(outer(u, transpose(v)), Error);
}

TEST_CASE("svd of a diagonal matrix") {
  const Matrix d = Matrix::from_rows({{3, 0}, {0, 2}});
  const SvdFactors f = full_svd(d);
  REQUIRE(f.sigma.size() == 2);
  CHECK(f.sigma[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(f.sigma[1] == doctest::Approx(2.0).epsilon(1e-15));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(f.u(i, i)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(f.v(i, i)) == doctest::Approx(1.0).epsilon(1e-15));
  }
  // Reversed order on input must still come out descending.
  const SvdFactors g = full_svd(Matrix::from_rows({{2, 0}, {0, 3}}));
  CHECK(g.sigma[0] == doctest::Approx(3.0));
}

TEST_CASE("svd of the zero matrix") {
  const SvdFactors f = full_svd(Matrix::zeros(4, 2));
  CHECK(f.sigma == std::vector<double>{0.0, 0.0});
  CHECK(f.u.rows() == 4);
  CHECK(f.u.cols() == 4);
  CHECK(f.v.rows() == 2);
  CHECK(orthogonality_defect(f.u) <= 1e-12 * 4);
  CHECK(orthogonality_defect(f.v) <= 1e-12 * 2);
}

TEST_CASE("svd contract on random shapes up to 12x12") {
  Rng rng(9);
  for (std::size_t m = 1; m <= 12; ++m) {
    for (std::size_t n = 1; n <= 12; ++n) {
      const Matrix a = oracle::random_matrix(rng, m, n);
      const SvdFactors f = full_svd(a);
      REQUIRE(f.u.rows() == m);
      REQUIRE(f.u.cols() == m);
      REQUIRE(f.v.rows() == n);
      REQUIRE(f.v.cols() == n);
      REQUIRE(f.sigma.size() == std::min(m, n));
      CHECK(frobenius_norm(f.reconstruct() - a) <= 1e-12 * (1 + f.sigma_max()));
      CHECK(orthogonality_defect(f.u) <= 1e-12 * m);
      CHECK(orthogonality_defect(f.v) <= 1e-12 * n);
      for (std::size_t i = 1; i < f.sigma.size(); ++i) CHECK(f.sigma[i] <= f.sigma[i - 1]);
      for (double s : f.sigma) CHECK(s >= 0.0);
    }
  }
}

TEST_CASE("svd of rank-deficient matrices keeps full orthogonal factors") {
  Rng rng(10);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 2 + rng.below(10), n = 2 + rng.below(10);
    const std::size_t r = 1 + rng.below(std::min(m, n) - 1);
    const Matrix a = matmul(oracle::random_matrix(rng, m, r), oracle::random_matrix(rng, r, n));
    const SvdFactors f = full_svd(a);
    CHECK(frobenius_norm(f.reconstruct() - a) <= 1e-12 * (1 + f.sigma_max()));
    CHECK(orthogonality_defect(f.u) <= 1e-12 * m);
    CHECK(orthogonality_defect(f.v) <= 1e-12 * n);
    CHECK(rank_with_tolerance(a, kDefaultKernelTol) == r);
    // Columns of U past the rank are left null vectors.
    for (std::size_t j = r; j < m; ++j) {
      const Matrix u = Matrix::column(f.u.col(j));
      CHECK(frobenius_norm(matmul(transpose(u), a)) <= 1e-10 * f.sigma_max());
    }
  }
}

TEST_CASE("rank with tolerance") {
  CHECK(rank_with_tolerance(Matrix::identity(3), 1e-10) == 3);
  CHECK(rank_with_tolerance(Matrix::zeros(3, 5), 1e-10) == 0);
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix u = oracle::random_matrix(rng, 5, 1);
    Matrix v = oracle::random_matrix(rng, 4, 1);
    u = scale(u, 1.0 / frobenius_norm(u));
    v = scale(v, 1.0 / frobenius_norm(v));
    CHECK(rank_with_tolerance(outer(u, v), 1e-10) == 1);
  }
  CHECK(rank_with_tolerance(Matrix::from_rows({{1, 0}, {0, 1e-12}}), 1e-10) == 1);
  CHECK(rank_with_tolerance(Matrix::from_rows({{1, 0}, {0, 1e-8}}), 1e-10) == 2);
  CHECK_THROWS_AS(rank_with_tolerance(Matrix::identity(2), -1.0), Error);
}

TEST_CASE("pseudo-inverse satisfies the Penrose conditions") {
  Rng rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 1 + rng.below(8), n = 1 + rng.below(8);
    const std::size_t r = 1 + rng.below(std::min(m, n));
    const Matrix a = matmul(oracle::random_matrix(rng, m, r), oracle::random_matrix(rng, r, n));
    const Matrix p = pseudo_inverse(a, 1e-10);
    const double s = 1 + frobenius_norm(a) * frobenius_norm(p);
    CHECK(frobenius_norm(matmul(matmul(a, p), a) - a) <= 1e-10 * s * frobenius_norm(a));
    CHECK(frobenius_norm(matmul(matmul(p, a), p) - p) <= 1e-10 * s * frobenius_norm(p));
    const Matrix ap = matmul(a, p);
    CHECK(frobenius_norm(ap - transpose(ap)) <= 1e-10 * s);
  }
}
