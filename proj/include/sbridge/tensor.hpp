#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "sbridge/error.hpp"

namespace sbridge {

using Vector = std::vector<double>;

/// Dense vector with every entry >= 0. Length is fixed at construction.
class NonNegVector {
 public:
  NonNegVector() = default;
  explicit NonNegVector(std::size_t n, double fill = 0.0);
  explicit NonNegVector(Vector values);
  NonNegVector(std::initializer_list<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const Vector& vec() const noexcept { return values_; }
  double sum() const;

  friend bool operator==(const NonNegVector&, const NonNegVector&) = default;

 private:
  Vector values_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix with nonnegative entries. Only strictly
/// positive entries are stored, so the stored pattern is the support.
class NonNegMatrix {
 public:
  NonNegMatrix() = default;
  NonNegMatrix(std::size_t rows, std::size_t cols);

  /// Duplicates are summed; zeros are dropped; negative or non-finite values throw.
  static NonNegMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static NonNegMatrix from_dense(const std::vector<Vector>& rows);
  static NonNegMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_cols(std::size_t i) const {
    return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  /// Entry lookup; 0 when (i, j) is outside the support.
  double at(std::size_t i, std::size_t j) const;
  bool in_support(std::size_t i, std::size_t j) const;
  bool support_subset_of(const NonNegMatrix& other) const;

  /// y = A x
  Vector multiply(std::span<const double> x) const;
  /// y = A^T x
  Vector multiply_transpose(std::span<const double> x) const;
  /// In-place variants; y must already have the right length.
  void multiply_into(std::span<const double> x, std::span<double> y) const;
  void multiply_transpose_into(std::span<const double> x, std::span<double> y) const;

  /// diag(left) * A * diag(right); entries that become zero leave the support.
  NonNegMatrix scaled(std::span<const double> left, std::span<const double> right) const;
  NonNegMatrix transpose() const;
  std::vector<Triplet> triplets() const;
  std::vector<Vector> to_dense() const;

  friend bool operator==(const NonNegMatrix&, const NonNegMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  Vector values_;
};

/// Normalized KL divergence sum_i p_i log(p_i/q_i) - p_i + q_i with 0 log 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const NonNegVector& p, const NonNegVector& q);
double kl_divergence(const NonNegMatrix& p, const NonNegMatrix& q);

NonNegVector row_sums(const NonNegMatrix& m);
NonNegVector col_sums(const NonNegMatrix& m);

enum class ElementwiseOp { kMul, kDiv, kExp, kLog };

/// Element-wise algebra on dense vectors. Division treats 0/0 as 0 and throws
/// DivideByZero for a nonzero dividend over a zero divisor.
Vector elementwise(ElementwiseOp op, std::span<const double> a, std::span<const double> b = {});
/// Element-wise product or quotient restricted to the stored support of `a`.
/// Only kMul and kDiv are meaningful for matrices (log leaves the orthant).
NonNegMatrix elementwise(ElementwiseOp op, const NonNegMatrix& a, const NonNegMatrix& b);

double max_abs_diff(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);

}  // namespace sbridge
