#include "sbridge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sbridge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSupportViolation: return "SupportViolation";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDivideByZero: return "DivideByZero";
    case ErrorCode::kLogOfNonPositive: return "LogOfNonPositive";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidVolume: return "InvalidVolume";
    case ErrorCode::kHypothesisViolated: return "HypothesisViolated";
    case ErrorCode::kTopologyError: return "TopologyError";
    case ErrorCode::kFlowImbalance: return "FlowImbalance";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kDegenerateUpdate: return "DegenerateUpdate";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kMaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::kNotInKernel: return "NotInKernel";
    case ErrorCode::kNegativeMass: return "NegativeMass";
    case ErrorCode::kNotCanonicalizable: return "NotCanonicalizable";
    case ErrorCode::kInvarianceViolation: return "InvarianceViolation";
    case ErrorCode::kSchemaError: return "SchemaError";
  }
  return "Unknown";
}

namespace {

void check_nonneg(double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument,
                "entry must be finite and nonnegative, got " + std::to_string(v));
  }
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kShapeMismatch,
                "length " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

NonNegVector::NonNegVector(std::size_t n, double fill) : values_(n, fill) { check_nonneg(fill); }

NonNegVector::NonNegVector(Vector values) : values_(std::move(values)) {
  for (double v : values_) check_nonneg(v);
}

NonNegVector::NonNegVector(std::initializer_list<double> values)
    : NonNegVector(Vector(values)) {}

double NonNegVector::sum() const { return sbridge::sum(values_); }

NonNegMatrix::NonNegMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}


NonNegMatrix NonNegMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw Error(ErrorCode::kShapeMismatch, "triplet (" + std::to_string(t.row) + "," +
                                                 std::to_string(t.col) + ") outside " +
                                                 std::to_string(rows) + "x" +
                                                 std::to_string(cols));
    }
    check_nonneg(t.value);
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  NonNegMatrix m(rows, cols);
  std::size_t k = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    while (k < triplets.size() && triplets[k].row == i) {
      const std::size_t j = triplets[k].col;
      double v = 0.0;
      while (k < triplets.size() && triplets[k].row == i && triplets[k].col == j) {
        v += triplets[k].value;
        ++k;
      }
      if (v > 0.0) {
        m.col_idx_.push_back(j);
        m.values_.push_back(v);
      }
    }
    m.row_ptr_[i + 1] = m.values_.size();
  }
  return m;
}

NonNegMatrix NonNegMatrix::from_dense(const std::vector<Vector>& rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.front().size();
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < n; ++i) {
    check_same_size(rows[i].size(), m);
    for (std::size_t j = 0; j < m; ++j) {
      check_nonneg(rows[i][j]);
      if (rows[i][j] > 0.0) trip.push_back({i, j, rows[i][j]});
    }
  }
  return from_triplets(n, m, std::move(trip));
}

NonNegMatrix NonNegMatrix::identity(std::size_t n) {
  std::vector<Triplet> trip;
  trip.reserve(n);
  for (std::size_t i = 0; i < n; ++i) trip.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(trip));
}

double NonNegMatrix::at(std::size_t i, std::size_t j) const {
  const auto cols = row_cols(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return values_[row_ptr_[i] + static_cast<std::size_t>(it - cols.begin())];
}

bool NonNegMatrix::in_support(std::size_t i, std::size_t j) const {
  const auto cols = row_cols(i);
  return std::binary_search(cols.begin(), cols.end(), j);
}

bool NonNegMatrix::support_subset_of(const NonNegMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto mine = row_cols(i);
    const auto theirs = other.row_cols(i);
    if (!std::includes(theirs.begin(), theirs.end(), mine.begin(), mine.end())) return false;
  }
  return true;
}

Vector NonNegMatrix::multiply(std::span<const double> x) const {
  Vector y(rows_, 0.0);
  multiply_into(x, y);
  return y;
}

Vector NonNegMatrix::multiply_transpose(std::span<const double> x) const {
  Vector y(cols_, 0.0);
  multiply_transpose_into(x, y);
  return y;
}

void NonNegMatrix::multiply_into(std::span<const double> x, std::span<double> y) const {
  check_same_size(x.size(), cols_);
  check_same_size(y.size(), rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    double acc = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) acc += values_[k] * x[col_idx_[k]];
    y[i] = acc;
  }
}

void NonNegMatrix::multiply_transpose_into(std::span<const double> x, std::span<double> y) const {
  check_same_size(x.size(), rows_);
  check_same_size(y.size(), cols_);
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * xi;
  }
}

NonNegMatrix NonNegMatrix::scaled(std::span<const double> left,
                                  std::span<const double> right) const {
  check_same_size(left.size(), rows_);
  check_same_size(right.size(), cols_);
  NonNegMatrix m(rows_, cols_);
  m.col_idx_.reserve(nnz());
  m.values_.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i) {
    check_nonneg(left[i]);
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t j = col_idx_[k];
      const double v = left[i] * values_[k] * right[j];
      check_nonneg(v);
      if (v > 0.0) {
        m.col_idx_.push_back(j);
        m.values_.push_back(v);
      }
    }
    m.row_ptr_[i + 1] = m.values_.size();
  }
  return m;
}

NonNegMatrix NonNegMatrix::transpose() const {
  std::vector<Triplet> trip;
  trip.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      trip.push_back({col_idx_[k], i, values_[k]});
  return from_triplets(cols_, rows_, std::move(trip));
}

std::vector<Triplet> NonNegMatrix::triplets() const {
  std::vector<Triplet> trip;
  trip.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      trip.push_back({i, col_idx_[k], values_[k]});
  return trip;
}

std::vector<Vector> NonNegMatrix::to_dense() const {
  std::vector<Vector> out(rows_, Vector(cols_, 0.0));
  for (const auto& t : triplets()) out[t.row][t.col] = t.value;
  return out;
}

namespace {

// One KL term with the 0 log 0 convention as an explicit branch.
double kl_term(double p, double q) {
  if (p == 0.0) return q;
  if (q == 0.0) {
    throw Error(ErrorCode::kSupportViolation, "p > 0 where q = 0");
  }
  return p * std::log(p / q) - p + q;
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  check_same_size(p.size(), q.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    check_nonneg(p[i]);
    check_nonneg(q[i]);
    d += kl_term(p[i], q[i]);
  }
  return d;
}

double kl_divergence(const NonNegVector& p, const NonNegVector& q) {
  return kl_divergence(p.values(), q.values());
}

double kl_divergence(const NonNegMatrix& p, const NonNegMatrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix shapes differ");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto pc = p.row_cols(i);
    const auto pv = p.row_values(i);
    const auto qc = q.row_cols(i);
    const auto qv = q.row_values(i);
    std::size_t a = 0;
    std::size_t b = 0;
    // Merge the two sorted supports of row i.
    while (a < pc.size() || b < qc.size()) {
      if (b == qc.size() || (a < pc.size() && pc[a] < qc[b])) {
        throw Error(ErrorCode::kSupportViolation,
                    "p > 0 at (" + std::to_string(i) + "," + std::to_string(pc[a]) +
                        ") where q = 0");
      }
      if (a < pc.size() && pc[a] == qc[b]) {
        d += kl_term(pv[a], qv[b]);
        ++a;
      } else {
        d += qv[b];
      }
      ++b;
    }
  }
  return d;
}

NonNegVector row_sums(const NonNegMatrix& m) {
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = sum(m.row_values(i));
  return NonNegVector(std::move(out));
}

NonNegVector col_sums(const NonNegMatrix& m) {
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto c = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) out[c[k]] += v[k];
  }
  return NonNegVector(std::move(out));
}

Vector elementwise(ElementwiseOp op, std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  switch (op) {
    case ElementwiseOp::kMul:
      check_same_size(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
      break;
    case ElementwiseOp::kDiv:
      check_same_size(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
          out[i] = 0.0;
        } else if (b[i] == 0.0) {
          throw Error(ErrorCode::kDivideByZero, "zero divisor at index " + std::to_string(i));
        } else {
          out[i] = a[i] / b[i];
        }
      }
      break;
    case ElementwiseOp::kExp:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::exp(a[i]);
      break;
    case ElementwiseOp::kLog:
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] > 0.0)) {
          throw Error(ErrorCode::kLogOfNonPositive, "log of " + std::to_string(a[i]) +
                                                        " at index " + std::to_string(i));
        }
        out[i] = std::log(a[i]);
      }
      break;
  }
  return out;
}

NonNegMatrix elementwise(ElementwiseOp op, const NonNegMatrix& a, const NonNegMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix shapes differ");
  }
  if (op != ElementwiseOp::kMul && op != ElementwiseOp::kDiv) {
    throw Error(ErrorCode::kInvalidArgument, "matrix elementwise supports mul and div only");
  }
  std::vector<Triplet> trip;
  for (const auto& t : a.triplets()) {
    const double d = b.at(t.row, t.col);
    if (op == ElementwiseOp::kMul) {
      trip.push_back({t.row, t.col, t.value * d});
    } else {
      if (d == 0.0) {
        throw Error(ErrorCode::kDivideByZero, "zero divisor at (" + std::to_string(t.row) +
                                                  "," + std::to_string(t.col) + ")");
      }
      trip.push_back({t.row, t.col, t.value / d});
    }
  }
  return NonNegMatrix::from_triplets(a.rows(), a.cols(), std::move(trip));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sum(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

}  // namespace sbridge
