#pragma once

// Small dense linear algebra: a row-major data matrix, symmetric positive
// definite matrices, their Cholesky factors and the scaled Mahalanobis norm
// ||y||_{S^-1} = sqrt(y' S^-1 y / p).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "edfmon/errors.hpp"

namespace edfmon {

/// Row-major rows x cols matrix of doubles. Used for data (one observation
/// per row) as well as for small square matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionMismatch("matrix data has " + std::to_string(data_.size()) +
                              " entries, expected " + std::to_string(rows_ * cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("ragged initializer list");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  /// Single-column matrix from a series.
  static Matrix column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  /// Rows [first, first + count).
  Matrix slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw DimensionMismatch("row slice out of range");
    return Matrix(count, cols_,
                  std::vector<double>(data_.begin() + first * cols_,
                                      data_.begin() + (first + count) * cols_));
  }

  void append_row(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw DimensionMismatch("appended row has wrong width");
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix product");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// Symmetric positive-definite p x p matrix. Symmetry is validated on
/// construction; positive definiteness is established by cholesky().
class SpdMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-12;

  SpdMatrix() = default;
  explicit SpdMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
      throw DimensionMismatch("SpdMatrix must be square and non-empty");
    }
    const std::size_t p = m_.rows();
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) {
        const double a = m_(i, j), b = m_(j, i);
        if (std::abs(a - b) > kSymmetryTol * std::max(1.0, std::abs(a))) {
          throw NotSymmetric("entries (" + std::to_string(i) + "," + std::to_string(j) +
                             ") differ");
        }
        const double s = 0.5 * (a + b);
        m_(i, j) = s;
        m_(j, i) = s;
      }
  }

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& entries() const noexcept { return m_; }

 private:
  Matrix m_;
};

/// Lower-triangular factor L with strictly positive diagonal (full storage,
/// upper part zero).
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(Matrix entries) : m_(std::move(entries)) {}

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& entries() const noexcept { return m_; }

  /// L * L^T.
  Matrix reconstruct() const { return m_ * m_.transpose(); }

  /// Solves L z = y in place.
  void forward_solve_inplace(std::span<double> y) const {
    const std::size_t p = dim();
    if (y.size() != p) throw DimensionMismatch("forward solve: vector has wrong length");
    for (std::size_t i = 0; i < p; ++i) {
      double s = y[i];
      const double* li = &m_.data()[i * p];
      for (std::size_t k = 0; k < i; ++k) s -= li[k] * y[k];
      y[i] = s / li[i];
    }
  }

  std::vector<double> forward_solve(std::span<const double> y) const {
    std::vector<double> z(y.begin(), y.end());
    forward_solve_inplace(z);
    return z;
  }

 private:
  Matrix m_;
};

inline LowerTriangular cholesky(const SpdMatrix& a) {
  const std::size_t p = a.dim();
  Matrix l(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      throw NotPositiveDefinite("pivot " + std::to_string(j) + " is " + std::to_string(d));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return LowerTriangular(std::move(l));
}

/// sqrt(y' S^-1 y / p) where chol is the Cholesky factor of S.
inline double mahalanobis_norm(std::span<const double> y, const LowerTriangular& chol) {
  if (y.size() != chol.dim()) {
    throw DimensionMismatch("vector of length " + std::to_string(y.size()) +
                            " against factor of dimension " + std::to_string(chol.dim()));
  }
  std::vector<double> z = chol.forward_solve(y);
  double ss = 0.0;
  for (double v : z) ss += v * v;
  return std::sqrt(ss / static_cast<double>(z.size()));
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace edfmon
