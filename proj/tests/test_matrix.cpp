#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "edfmon/matrix.hpp"
#include "edfmon/rng.hpp"
#include "support/oracles.hpp"

using namespace edfmon;

namespace {

Matrix random_spd(std::size_t p, Rng& rng) {
  Matrix b(p, p);
  for (auto& v : b.data()) v = rng.normal();
  Matrix a = b.transpose() * b;
  for (std::size_t i = 0; i < p; ++i) a(i, i) += 1e-3;
  return a;
}

}  // namespace

TEST(Cholesky, IdentityMapsToIdentity) {
  const auto l = cholesky(SpdMatrix(Matrix::identity(2)));
  const Matrix r = l.reconstruct();
  EXPECT_EQ(r, Matrix::identity(2));
  EXPECT_DOUBLE_EQ(l(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(l(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(l(1, 1), 1.0);
}

TEST(Cholesky, Diagonal) {
  const auto l = cholesky(SpdMatrix(Matrix{{4, 0}, {0, 9}}));
  EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(l(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(l(1, 1), 3.0);
}

TEST(Cholesky, IidIndicatorCovarianceReconstructs) {
  const Matrix a{{2.0 / 9, 1.0 / 9}, {1.0 / 9, 2.0 / 9}};
  const auto l = cholesky(SpdMatrix(a));
  Matrix diff = l.reconstruct();
  for (std::size_t i = 0; i < 4; ++i) diff.data()[i] -= a.data()[i];
  EXPECT_LT(frobenius_norm(diff) / frobenius_norm(a), 1e-10);
  EXPECT_GT(l(0, 0), 0.0);
  EXPECT_GT(l(1, 1), 0.0);
}

TEST(Cholesky, RandomSpdReconstructs) {
  Rng rng(42);
  for (std::size_t p : {1u, 2u, 3u, 5u, 10u, 16u}) {
    const Matrix a = random_spd(p, rng);
    const auto l = cholesky(SpdMatrix(a));
    Matrix diff = l.reconstruct();
    for (std::size_t i = 0; i < a.data().size(); ++i) diff.data()[i] -= a.data()[i];
    EXPECT_LT(frobenius_norm(diff) / frobenius_norm(a), 1e-10) << "p=" << p;
  }
}

TEST(Cholesky, IndefiniteThrows) {
  EXPECT_THROW(cholesky(SpdMatrix(Matrix{{1, 2}, {2, 1}})), NotPositiveDefinite);
  EXPECT_THROW(cholesky(SpdMatrix(Matrix{{0, 0}, {0, 1}})), NotPositiveDefinite);
}

TEST(SpdMatrix, RejectsAsymmetric) {
  EXPECT_THROW(SpdMatrix(Matrix{{1, 0.5}, {0.4, 1}}), NotSymmetric);
  EXPECT_THROW(SpdMatrix(Matrix(2, 3)), DimensionMismatch);
}

TEST(SpdMatrix, SymmetrizesWithinTolerance) {
  const SpdMatrix s(Matrix{{1, 0.5 + 1e-14}, {0.5, 1}});
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_NEAR(s(0, 1), 0.5, 1e-13);
}

TEST(Mahalanobis, ZeroVector) {
  const auto l = cholesky(SpdMatrix(Matrix{{2, 1}, {1, 2}}));
  const std::vector<double> y{0, 0};
  EXPECT_EQ(mahalanobis_norm(y, l), 0.0);
}

TEST(Mahalanobis, IdentityThreeFour) {
  const auto l = cholesky(SpdMatrix(Matrix::identity(2)));
  const std::vector<double> y{3, 4};
  EXPECT_NEAR(mahalanobis_norm(y, l), std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(mahalanobis_norm(y, l), 3.53553, 1e-5);
}

TEST(Mahalanobis, MatchesTwoByTwoInverse) {
  const std::array<double, 4> a{2.0 / 9, 1.0 / 9, 1.0 / 9, 2.0 / 9};
  const auto l = cholesky(SpdMatrix(Matrix{{a[0], a[1]}, {a[2], a[3]}}));
  for (const auto& y : {std::array<double, 2>{1, 0}, std::array<double, 2>{0.3, -0.7}}) {
    const double expected = std::sqrt(oracle::quad_form_inverse_2x2(a, y) / 2.0);
    EXPECT_NEAR(mahalanobis_norm(std::vector<double>(y.begin(), y.end()), l), expected, 1e-12);
  }
  // (1,0): Sigma^{-1} = [[6,-3],[-3,6]] so the norm is sqrt(6/2).
  EXPECT_NEAR(mahalanobis_norm(std::vector<double>{1, 0}, l), std::sqrt(3.0), 1e-12);
}

TEST(Mahalanobis, AbsoluteHomogeneity) {
  Rng rng(7);
  const auto l = cholesky(SpdMatrix(random_spd(4, rng)));
  std::vector<double> y(4);
  for (auto& v : y) v = rng.normal();
  const double base = mahalanobis_norm(y, l);
  for (double c : {-3.0, -0.5, 0.0, 2.0, 10.0}) {
    std::vector<double> cy(y);
    for (auto& v : cy) v *= c;
    EXPECT_NEAR(mahalanobis_norm(cy, l), std::abs(c) * base, 1e-12 * std::max(1.0, base));
  }
}

TEST(Mahalanobis, IdentityIsScaledEuclidean) {
  Rng rng(3);
  for (std::size_t p : {1u, 3u, 7u}) {
    const auto l = cholesky(SpdMatrix(Matrix::identity(p)));
    std::vector<double> y(p);
    double ss = 0.0;
    for (auto& v : y) {
      v = rng.normal();
      ss += v * v;
    }
    EXPECT_NEAR(mahalanobis_norm(y, l), std::sqrt(ss / static_cast<double>(p)), 1e-12);
  }
}

TEST(Mahalanobis, DimensionMismatch) {
  const auto l = cholesky(SpdMatrix(Matrix::identity(2)));
  EXPECT_THROW(mahalanobis_norm(std::vector<double>{1, 2, 3}, l), DimensionMismatch);
}

TEST(Matrix, BasicOperations) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(a.rows(), 2u);
  EXPECT_EQ(a.cols(), 3u);
  const Matrix t = a.transpose();
  EXPECT_EQ(t(2, 1), 6.0);
  const Matrix p = a * t;
  EXPECT_EQ(p(0, 0), 14.0);
  EXPECT_EQ(p(0, 1), 32.0);
  EXPECT_EQ(p(1, 1), 77.0);
  EXPECT_EQ(a.col(1), (std::vector<double>{2, 5}));
  const Matrix s = a.slice_rows(1, 1);
  EXPECT_EQ(s.rows(), 1u);
  EXPECT_EQ(s(0, 2), 6.0);
  Matrix grow;
  grow.append_row(std::vector<double>{1, 2});
  grow.append_row(std::vector<double>{3, 4});
  EXPECT_EQ(grow.rows(), 2u);
  EXPECT_THROW(grow.append_row(std::vector<double>{1, 2, 3}), DimensionMismatch);
  EXPECT_THROW(a * a, DimensionMismatch);
}

TEST(LowerTriangular, ForwardSolve) {
  const auto l = cholesky(SpdMatrix(Matrix{{4, 2}, {2, 5}}));
  // L = [[2,0],[1,2]]; L z = (2, 5) -> z = (1, 2).
  const auto z = l.forward_solve(std::vector<double>{2, 5});
  EXPECT_NEAR(z[0], 1.0, 1e-15);
  EXPECT_NEAR(z[1], 2.0, 1e-15);
}
