#include "sbridge/observability.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sbridge {

namespace {

Eigen::MatrixXd as_columns(const std::vector<Vector>& vs, std::size_t n) {
  Eigen::MatrixXd m(n, vs.size());
  for (std::size_t c = 0; c < vs.size(); ++c) {
    if (vs[c].size() != n) throw Error(ErrorCode::kShapeMismatch, "basis vectors differ in length");
    for (std::size_t i = 0; i < n; ++i) m(i, c) = vs[c][i];
  }
  return m;
}

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

Eigen::MatrixXd observability_matrix(const MarkovPrior& prior, const ObservationModel& obs) {
  prior.check_shapes();
  const std::size_t n = prior.n;
  if (obs.n() != n) throw Error(ErrorCode::kShapeMismatch, "observation model size != n");
  const std::size_t k = obs.k();
  Eigen::MatrixXd o((prior.horizon() + 1) * k, n);

  // phi(i, c): mass at state i at time t when unit mass starts in state c.
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t t = 0;; ++t) {
    for (std::size_t j = 0; j < k; ++j) o.row(t * k + j) = phi.row(obs.sensors()[j]);
    if (t == prior.horizon()) break;
    const auto& a = prior.steps[t];
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cols = a.row_cols(i);
      const auto vals = a.row_values(i);
      for (std::size_t e = 0; e < cols.size(); ++e) next.row(cols[e]) += vals[e] * phi.row(i);
    }
    phi = std::move(next);
  }
  return o;
}

ObservabilityReport kernel_and_rank(const Eigen::MatrixXd& o, std::optional<double> tol) {
  const auto n = o.cols();
  ObservabilityReport report;
  double scale = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) scale = std::max(scale, o.col(c).norm());
  const double threshold = tol ? *tol : 1e-10 * scale;
  if (!(threshold >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "rank tolerance must be >= 0");

  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
  std::size_t rank = 0;
  if (o.rows() > 0 && scale > 0.0) {
    const Eigen::MatrixXd ot = o.transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ot);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    const auto diag = std::min(r.rows(), r.cols());
    for (Eigen::Index i = 0; i < diag; ++i)
      if (std::abs(r(i, i)) > threshold) ++rank;
    q = qr.householderQ();
  }

  report.rank = rank;
  for (auto c = static_cast<Eigen::Index>(rank); c < n; ++c) {
    Vector v(q.col(c).data(), q.col(c).data() + n);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[peak]) + 1e-12) peak = i;
    if (v[peak] < 0.0) {
      for (double& x : v) x = -x;
    }
    for (double& x : v)
      if (x == 0.0) x = 0.0;  // drop negative zeros
    report.kernel_basis.push_back(std::move(v));
  }
  report.is_unique = report.kernel_basis.empty();
  return report;
}

std::vector<std::size_t> downstream_unobserved_set(const Eigen::MatrixXd& o, const MarkovPrior& prior,
                                                   const ObservationModel& obs) {
  const std::size_t n = prior.n;
  if (static_cast<std::size_t>(o.cols()) != n) throw Error(ErrorCode::kShapeMismatch, "O has wrong width");

  // unseen[t][i]: mass sitting in i at time t reaches no sensor at times t..T.
  const std::size_t horizon = prior.horizon();
  std::vector<std::vector<bool>> unseen(horizon + 1, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i) unseen[horizon][i] = !obs.is_observed(i);
  for (std::size_t t = horizon; t-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      bool hidden = !obs.is_observed(i);
      for (auto j : prior.steps[t].row_cols(i)) hidden = hidden && unseen[t + 1][j];
      unseen[t][i] = hidden;
    }
  }
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!unseen[t][i]) continue;
      for (auto j : prior.steps[t].row_cols(i)) {
        if (!unseen[t + 1][j]) {
          throw Error(ErrorCode::kInvarianceViolation,
                      "state " + prior.state_id(i) + " is hidden at t=" + std::to_string(t) +
                          " but feeds observable state " + prior.state_id(j));
        }
      }
    }
  }

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool zero_column = o.rows() == 0 || o.col(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff() == 0.0;
    if (zero_column != unseen[0][i]) {
      throw Error(ErrorCode::kInvarianceViolation,
                  "column " + std::to_string(i) + " of O disagrees with the support propagation");
    }
    if (zero_column) out.push_back(i);
  }
  return out;
}

ObservabilityReport analyze_observability(const MarkovPrior& prior, const ObservationModel& obs,
                                          std::optional<double> tol) {
  const auto o = observability_matrix(prior, obs);
  auto report = kernel_and_rank(o, tol);
  report.unobservable_downstream_set = downstream_unobserved_set(o, prior, obs);
  return report;
}

double max_principal_angle(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) return std::numbers::pi / 2.0;
  if (a.empty()) return 0.0;
  const std::size_t n = a.front().size();
  const Eigen::MatrixXd qa = orthonormal_columns(as_columns(a, n));
  const Eigen::MatrixXd qb = orthonormal_columns(as_columns(b, n));
  // sin of the largest angle is the norm of the part of span(b) outside span(a).
  const Eigen::MatrixXd residual = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
  const double s = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  return std::asin(std::min(1.0, s));
}

std::vector<NonNegMatrix> controlled_prior(const DualState& state, const MarkovPrior& prior) {
  const std::size_t horizon = prior.horizon();
  if (state.horizon() != horizon) throw Error(ErrorCode::kShapeMismatch, "state and prior horizons differ");
  std::vector<Vector> w(horizon + 1);
  w[0].assign(prior.n, 1.0);
  for (std::size_t t = 1; t <= horizon; ++t) w[t] = elementwise(ElementwiseOp::kMul, state.u[t], state.phi[t]);

  std::vector<NonNegMatrix> out;
  out.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto& a = prior.steps[t];
    const Vector reach = a.multiply(w[t + 1]);
    Vector left(prior.n, 0.0);
    for (std::size_t i = 0; i < prior.n; ++i) {
      if (w[t][i] > 0.0) {
        left[i] = state.u[t][i] / w[t][i];
      } else if (state.u[t][i] > 0.0 && reach[i] > 0.0) {
        throw Error(ErrorCode::kDivideByZero, "w vanishes on active row " + prior.state_id(i) +
                                                  " at t=" + std::to_string(t));
      }
    }
    out.push_back(a.scaled(left, w[t + 1]));
  }
  return out;
}

TransportPlan optimal_set_shift(const TransportPlan& plan, const std::vector<NonNegMatrix>& controlled,
                                std::span<const double> z0, const ObservationModel& obs, double tol) {
  const std::size_t horizon = plan.horizon();
  if (controlled.size() != horizon) throw Error(ErrorCode::kShapeMismatch, "controlled prior horizon differs");
  if (z0.size() != obs.n()) throw Error(ErrorCode::kShapeMismatch, "z0 has wrong length");

  double scale = 1.0;
  for (double v : z0) scale = std::max(scale, std::abs(v));
  const double slack = tol * scale;

  Vector z(z0.begin(), z0.end());
  TransportPlan out;
  for (std::size_t t = 0;; ++t) {
    for (std::size_t j = 0; j < obs.k(); ++j) {
      if (std::abs(z[obs.sensors()[j]]) > slack) {
        throw Error(ErrorCode::kNotInKernel, "shift is visible at sensor " + std::to_string(j) +
                                                 " at t=" + std::to_string(t));
      }
    }
    if (t == horizon) break;

    const auto& m = plan.steps[t];
    const auto& a = controlled[t];
    std::vector<Triplet> entries;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto mc = m.row_cols(i);
      const auto mv = m.row_values(i);
      const auto ac = a.row_cols(i);
      const auto av = a.row_values(i);
      std::size_t p = 0;
      std::size_t q = 0;
      while (p < mc.size() || q < ac.size()) {
        std::size_t col;
        double value = 0.0;
        if (q == ac.size() || (p < mc.size() && mc[p] < ac[q])) {
          col = mc[p];
          value = mv[p++];
        } else if (p == mc.size() || ac[q] < mc[p]) {
          col = ac[q];
          value = z[i] * av[q++];
        } else {
          col = mc[p];
          value = mv[p++] + z[i] * av[q++];
        }
        if (value < -slack) {
          throw Error(ErrorCode::kNegativeMass, "shifted plan has entry " + std::to_string(value) +
                                                    " at t=" + std::to_string(t));
        }
        if (value > 0.0) entries.push_back({i, col, value});
      }
    }
    out.steps.push_back(NonNegMatrix::from_triplets(m.rows(), m.cols(), std::move(entries)));
    z = a.multiply_transpose(z);
  }
  return out;
}

TransportPlan canonicalize(const TransportPlan& plan, const ObservabilityReport& report,
                           const std::vector<NonNegMatrix>& controlled, const ObservationModel& obs) {
  if (report.is_unique) return plan;
  const auto& hidden = report.unobservable_downstream_set;
  if (report.kernel_basis.size() != hidden.size()) {
    throw Error(ErrorCode::kNotCanonicalizable,
                "kernel has dimension " + std::to_string(report.kernel_basis.size()) + " but only " +
                    std::to_string(hidden.size()) + " states are downstream unobserved");
  }
  if (plan.horizon() == 0) return plan;
  const auto initial = row_sums(plan.steps.front());
  Vector z0(obs.n(), 0.0);
  for (auto i : hidden) z0[i] = -initial[i];
  return optimal_set_shift(plan, controlled, z0, obs);
}

}  // namespace sbridge
