#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbridge/observation.hpp"
#include "sbridge/prior.hpp"
#include "sbridge/tensor.hpp"

namespace sbridge {

struct TraceRow;

struct SolverConfig {
  /// Outer stop: infinity norm of the change of the unobserved initial mass.
  double outer_tol = 1e-8;
  /// Block coordinate ascent sweeps per outer step in inexact mode.
  std::size_t inner_sweeps_per_outer = 2;
  /// Solve every proximal subproblem to `residual_tol` instead.
  bool exact = false;
  std::size_t max_outer_iters = 1000000;
  /// Cap on sweeps for one full inner solve.
  std::size_t max_inner_sweeps = 200000;
  /// Max observation residual |C(phi . u . phi_hat) - rho|_inf accepted as converged.
  double residual_tol = 1e-9;
  /// Starting unobserved initial mass (length n-k, strictly positive). Empty
  /// means: spread the observed initial mass uniformly over unobserved states.
  std::optional<Vector> eta_init;
  /// Run the message recursions with log-sum-exp instead of products.
  bool log_domain = false;
  /// C(phi . phi_hat) below this at a sensor with rho > 0 is a degenerate update.
  double degenerate_floor = 1e-300;
  /// Called after every outer step with the trace row and the new eta.
  std::function<void(const TraceRow&, std::span<const double>)> on_iterate;

  void validate(std::size_t unobserved_count) const;
};

/// Dual iterate of the proximal subproblem together with its messages.
///
/// u[t] = exp(C^T lambda_t) is pinned to 1 on unobserved states. phi_hat[t]
/// collects the factors left of u[t] (phi_hat[0] = mu_hat) and phi[t] the
/// factors to its right (phi[T] = 1).
struct DualState {
  Vector mu_hat;
  std::vector<Vector> u;
  std::vector<Vector> phi_hat;
  std::vector<Vector> phi;
  /// Mirrors of u, phi_hat, phi in log space; filled only in log-domain mode.
  std::vector<Vector> log_u;
  std::vector<Vector> log_phi_hat;
  std::vector<Vector> log_phi;

  std::size_t horizon() const noexcept { return u.empty() ? 0 : u.size() - 1; }

  /// u = 1 everywhere with consistent messages.
  static DualState initial(const MarkovPrior& prior, Vector mu_hat);

  /// lambda_t = log(C u_t); -inf where the sensor reading forces zero mass.
  std::vector<Vector> lambda(const ObservationModel& obs) const;
  /// mu_t = phi_hat_t . u_t . phi_t for t = 0..T.
  std::vector<Vector> marginals() const;
};

struct TransportPlan {
  std::vector<NonNegMatrix> steps;

  std::size_t horizon() const noexcept { return steps.size(); }
  /// mu_t = M_t 1 for t < T and mu_T = M_{T-1}^T 1. Empty when T = 0.
  std::vector<Vector> marginals() const;
  /// max_t |M_t 1 - M_{t-1}^T 1|_inf
  double max_matching_error() const;
};

struct RemovedTransition {
  std::size_t t;
  std::size_t from;
  std::size_t to;
};

struct SupportReduction {
  MarkovPrior prior;
  std::vector<RemovedTransition> removed;
  /// forced_zero[t][i]: state i must carry no mass at time t.
  std::vector<std::vector<bool>> forced_zero;
};

/// Propagates the zeros forced by rho_t = 0 through the time-expanded support
/// graph and drops every prior transition touching a forced-zero state.
/// Throws Infeasible when a sensor with positive reading is forced to zero.
SupportReduction reduce_support(const MarkovPrior& prior, const ObservationModel& obs,
                                const ObservationSeries& rho);

/// phi_T = 1, phi_t = A_t (u_{t+1} . phi_{t+1}).
std::vector<Vector> backward_pass(const MarkovPrior& prior, const std::vector<Vector>& u);
/// phi_hat_0 = mu_hat, phi_hat_{t+1} = A_t^T (phi_hat_t . u_t).
std::vector<Vector> forward_pass(const MarkovPrior& prior, const std::vector<Vector>& u,
                                 std::span<const double> mu_hat);

/// Sets u_t on the sensors so that C(phi_t . u_t . phi_hat_t) = rho_t, then
/// refreshes phi_hat_{t+1}; phi is left as is. Calling it for t = 0..T in
/// order followed by refresh_backward is one bca_sweep.
void bca_update(DualState& state, const MarkovPrior& prior, const ObservationModel& obs,
                const ObservationSeries& rho, std::size_t t, const SolverConfig& config = {});
/// Recomputes every phi_t from the current scalings.
void refresh_backward(DualState& state, const MarkovPrior& prior, const SolverConfig& config = {});

/// One block coordinate ascent sweep over t = 0..T followed by a full backward
/// pass. Right after u_t is updated, C(phi_t . u_t . phi_hat_t) = rho_t.
void bca_sweep(DualState& state, const MarkovPrior& prior, const ObservationModel& obs,
               const ObservationSeries& rho, const SolverConfig& config = {});

/// sum_t lambda_t^T rho_t - mu_hat^T diag(u_0) A_0 ... A_{T-1} u_T, with the
/// product evaluated as (phi_t . phi_hat_t)^T u_t at `at_time`.
double dual_objective(const DualState& state, const ObservationModel& obs,
                      const ObservationSeries& rho, std::size_t at_time = 0);

/// mu_hat^T A_0 ... A_{T-1} 1: the constant dropped from the subproblem dual.
/// Adding it to dual_objective gives the value comparable with
/// subproblem_objective.
double dual_constant(const MarkovPrior& prior, std::span<const double> mu_hat);

/// max_t |C(phi_t . u_t . phi_hat_t) - rho_t|_inf
double observation_residual(const DualState& state, const ObservationModel& obs,
                            const ObservationSeries& rho);

/// M_t = diag(phi_hat_t . u_t) A_t diag(u_{t+1} . phi_{t+1}) without any
/// convergence check.
TransportPlan assemble_plan(const DualState& state, const MarkovPrior& prior);

/// assemble_plan, but throws NotConverged if the observation residual exceeds
/// `residual_tol`.
TransportPlan recover_primal(const DualState& state, const MarkovPrior& prior,
                             const ObservationModel& obs, const ObservationSeries& rho,
                             double residual_tol);

enum class InnerMode { kFull, kFixedSweeps };

struct InnerResult {
  DualState state;
  TransportPlan plan;
  std::size_t sweeps = 0;
  double residual = 0.0;
};

/// Solves the fixed-initial-prior subproblem by repeated bca_sweep, either to
/// config.residual_tol (kFull) or for config.inner_sweeps_per_outer sweeps.
InnerResult inner_solve(const MarkovPrior& prior, const ObservationModel& obs,
                        const ObservationSeries& rho, std::span<const double> mu_hat,
                        const SolverConfig& config, InnerMode mode = InnerMode::kFull,
                        const DualState* warm_start = nullptr);

struct TraceRow {
  std::size_t iter = 0;
  double eta_change = 0.0;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double residual = 0.0;
};

struct ProximalResult {
  TransportPlan plan;
  /// Unobserved part of the recovered initial marginal.
  Vector eta;
  /// Marginal trajectory mu_0..mu_T of the returned plan.
  std::vector<Vector> marginals;
  std::vector<TraceRow> trace;
  DualState state;
  /// Prior after support reduction; the plan and the state refer to it.
  MarkovPrior reduced_prior;
  std::size_t removed_transitions = 0;
  std::size_t total_sweeps = 0;
};

/// Raised when the outer loop hits max_outer_iters; carries the trace so far.
class MaxItersError : public Error {
 public:
  MaxItersError(const std::string& what, std::vector<TraceRow> trace)
      : Error(ErrorCode::kMaxItersExceeded, what), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

/// Entropic proximal-point outer loop. Each step fixes
/// mu_hat = C^T rho_0 + C̄^T eta, runs the inner block coordinate ascent
/// (warm-started from the previous dual state) and sets eta = C̄ M_0 1. Stops
/// once the eta change is at most outer_tol and the observation residual is at
/// most residual_tol.
ProximalResult proximal_solve(const MarkovPrior& prior, const ObservationModel& obs,
                              const ObservationSeries& rho, const SolverConfig& config = {});

/// Default starting point: the observed initial mass spread uniformly over the
/// unobserved states (falls back to the largest observed total, then to 1).
Vector default_eta_init(const ObservationModel& obs, const ObservationSeries& rho);

/// sum_t D(M_t | diag(M_t 1) A_t). Throws SupportViolation if supp(M_t) is not
/// contained in supp(A_t).
double primal_objective(const TransportPlan& plan, const MarkovPrior& prior);

/// Objective of the proximal subproblem: D(M_0 | diag(mu_hat) A_0) + sum_{t>=1} D(M_t | diag(M_t 1) A_t).
double subproblem_objective(const TransportPlan& plan, const MarkovPrior& prior,
                            std::span<const double> mu_hat);

/// Largest entry of diag(u_0) A_0 diag(u_1) ... A_{T-1} u_T minus 1. The
/// scalings are feasible for the dual of the full problem when this is <= 0.
double dual_constraint_excess(const DualState& state, const MarkovPrior& prior);

/// sum_t lambda_t^T rho_t, the dual objective of the full problem. Sensors
/// with rho = 0 contribute nothing.
double full_dual_objective(const DualState& state, const ObservationModel& obs, const ObservationSeries& rho);

}  // namespace sbridge
