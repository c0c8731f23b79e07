#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sbridge/bridge.hpp"

namespace sbridge {

struct ObservabilityReport {
  std::size_t rank = 0;
  /// Orthonormal basis of ker(O), each vector of length n.
  std::vector<Vector> kernel_basis;
  /// States whose initial mass never reaches a sensor within the horizon.
  std::vector<std::size_t> unobservable_downstream_set;
  bool is_unique = true;
};

/// Stacks C, C A_0^T, C A_1^T A_0^T, ..., C A_{T-1}^T ... A_0^T into a
/// ((T+1) k) x n matrix.
Eigen::MatrixXd observability_matrix(const MarkovPrior& prior, const ObservationModel& obs);

/// Numerical rank and orthonormal kernel basis from a column-pivoted QR of O^T.
/// The default tolerance is 1e-10 times the largest column norm of O. Each
/// basis vector is signed so that its largest-magnitude entry is positive.
ObservabilityReport kernel_and_rank(const Eigen::MatrixXd& o, std::optional<double> tol = std::nullopt);

/// Indices of the zero columns of O. Checks that the set is closed under the
/// prior's supports when followed forward in time (a state unseen from time t
/// on only feeds states unseen from t+1 on) and that it matches the zero
/// columns; throws InvarianceViolation otherwise.
std::vector<std::size_t> downstream_unobserved_set(const Eigen::MatrixXd& o, const MarkovPrior& prior,
                                                   const ObservationModel& obs);

/// observability_matrix + kernel_and_rank + downstream_unobserved_set.
ObservabilityReport analyze_observability(const MarkovPrior& prior, const ObservationModel& obs,
                                          std::optional<double> tol = std::nullopt);

/// Largest principal angle (radians) between span(a) and span(b); pi/2 when
/// the dimensions differ, 0 when both are empty.
double max_principal_angle(const std::vector<Vector>& a, const std::vector<Vector>& b);

/// Optimally controlled prior calA_t = diag(u_t / w_t) A_t diag(w_{t+1}) with
/// w_T = u_T, w_t = u_t . A_t w_{t+1} = u_t . phi_t for t >= 1 and w_0 = 1.
/// Rows of calA_0 then sum to u_0 . phi_0 = mu_0 / mu_hat, which is 1 at the
/// proximal fixed point.
std::vector<NonNegMatrix> controlled_prior(const DualState& state, const MarkovPrior& prior);

/// M~_t = M_t + diag(z_t) calA_t with z_{t+1} = calA_t^T z_t.
/// Throws NotInKernel if some C z_t exceeds `tol` in magnitude and
/// NegativeMass if an entry of M~ drops below -tol.
TransportPlan optimal_set_shift(const TransportPlan& plan, const std::vector<NonNegMatrix>& controlled,
                                std::span<const double> z0, const ObservationModel& obs,
                                double tol = 1e-9);

/// Moves all initial mass off the downstream unobserved set. Returns the plan
/// unchanged when the report is unique; throws NotCanonicalizable when the
/// kernel is not spanned by unit vectors on that set.
TransportPlan canonicalize(const TransportPlan& plan, const ObservabilityReport& report,
                           const std::vector<NonNegMatrix>& controlled, const ObservationModel& obs);

}  // namespace sbridge
