#include <algorithm>
#include <cmath>
#include <string>

#include "sbridge/bridge.hpp"
#include "logging.hpp"

namespace sbridge {

void SolverConfig::validate(std::size_t unobserved_count) const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be a positive number");
    }
  };
  positive(outer_tol, "outer_tol");
  positive(residual_tol, "residual_tol");
  positive(degenerate_floor, "degenerate_floor");
  if (inner_sweeps_per_outer == 0) throw Error(ErrorCode::kInvalidArgument, "inner_sweeps_per_outer must be >= 1");
  if (max_outer_iters == 0 || max_inner_sweeps == 0) {
    throw Error(ErrorCode::kInvalidArgument, "iteration caps must be >= 1");
  }
  if (eta_init) {
    if (eta_init->size() != unobserved_count) {
      throw Error(ErrorCode::kShapeMismatch, "eta_init has " + std::to_string(eta_init->size()) +
                                                 " entries, expected " + std::to_string(unobserved_count));
    }
    for (double v : *eta_init) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument, "eta_init must be strictly positive");
      }
    }
  }
}

std::vector<Vector> TransportPlan::marginals() const {
  std::vector<Vector> out;
  if (steps.empty()) return out;
  for (const auto& m : steps) out.push_back(row_sums(m).vec());
  out.push_back(col_sums(steps.back()).vec());
  return out;
}

double TransportPlan::max_matching_error() const {
  double worst = 0.0;
  for (std::size_t t = 1; t < steps.size(); ++t) {
    worst = std::max(worst, max_abs_diff(row_sums(steps[t]).values(), col_sums(steps[t - 1]).values()));
  }
  return worst;
}

TransportPlan assemble_plan(const DualState& state, const MarkovPrior& prior) {
  if (state.horizon() != prior.horizon()) throw Error(ErrorCode::kShapeMismatch, "state and prior horizons differ");
  TransportPlan plan;
  plan.steps.reserve(prior.horizon());
  for (std::size_t t = 0; t < prior.horizon(); ++t) {
    const Vector left = elementwise(ElementwiseOp::kMul, state.phi_hat[t], state.u[t]);
    const Vector right = elementwise(ElementwiseOp::kMul, state.u[t + 1], state.phi[t + 1]);
    plan.steps.push_back(prior.steps[t].scaled(left, right));
  }
  return plan;
}

TransportPlan recover_primal(const DualState& state, const MarkovPrior& prior,
                             const ObservationModel& obs, const ObservationSeries& rho,
                             double residual_tol) {
  const double residual = observation_residual(state, obs, rho);
  if (!(residual <= residual_tol)) {
    throw Error(ErrorCode::kNotConverged, "observation residual " + std::to_string(residual) +
                                              " exceeds tolerance " + std::to_string(residual_tol));
  }
  return assemble_plan(state, prior);
}

InnerResult inner_solve(const MarkovPrior& prior, const ObservationModel& obs,
                        const ObservationSeries& rho, std::span<const double> mu_hat,
                        const SolverConfig& config, InnerMode mode, const DualState* warm_start) {
  InnerResult out;
  const Vector mu(mu_hat.begin(), mu_hat.end());
  if (warm_start != nullptr) {
    out.state = *warm_start;
    out.state.mu_hat = mu;
  } else {
    out.state = DualState::initial(prior, mu);
  }

  if (mode == InnerMode::kFixedSweeps) {
    for (std::size_t s = 0; s < config.inner_sweeps_per_outer; ++s) bca_sweep(out.state, prior, obs, rho, config);
    out.sweeps = config.inner_sweeps_per_outer;
    out.residual = observation_residual(out.state, obs, rho);
  } else {
    do {
      if (out.sweeps == config.max_inner_sweeps) {
        throw Error(ErrorCode::kMaxItersExceeded,
                    "inner solve stopped after " + std::to_string(out.sweeps) +
                        " sweeps with residual " + std::to_string(out.residual));
      }
      bca_sweep(out.state, prior, obs, rho, config);
      ++out.sweeps;
      out.residual = observation_residual(out.state, obs, rho);
    } while (!(out.residual <= config.residual_tol));
  }
  out.plan = assemble_plan(out.state, prior);
  return out;
}

Vector default_eta_init(const ObservationModel& obs, const ObservationSeries& rho) {
  const std::size_t free = obs.unobserved().size();
  if (free == 0) return {};
  double mass = rho.rho.empty() ? 0.0 : rho.rho.front().sum();
  if (mass <= 0.0) {
    for (const auto& r : rho.rho) mass = std::max(mass, r.sum());
  }
  if (mass <= 0.0) mass = static_cast<double>(free);
  return Vector(free, mass / static_cast<double>(free));
}

namespace {

// D(M | diag(r) A) evaluated row by row as sum p log((p / r_i) / a) - p + r_i a,
// so that tiny row masses do not underflow the reference entries.
double row_scaled_kl(const NonNegMatrix& m, const NonNegMatrix& a, std::span<const double> r) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto mc = m.row_cols(i);
    const auto mv = m.row_values(i);
    const auto ac = a.row_cols(i);
    const auto av = a.row_values(i);
    std::size_t q = 0;
    for (std::size_t p = 0; p < mc.size(); ++p) {
      while (q < ac.size() && ac[q] < mc[p]) ++q;
      if (q == ac.size() || ac[q] != mc[p] || !(r[i] > 0.0)) {
        throw Error(ErrorCode::kSupportViolation, "plan has mass at (" + std::to_string(i) + "," +
                                                      std::to_string(mc[p]) + ") outside the prior support");
      }
      total += mv[p] * std::log(mv[p] / r[i] / av[q]) - mv[p];
    }
    if (r[i] > 0.0) {
      double row = 0.0;
      for (double v : av) row += v;
      total += r[i] * row;
    }
  }
  return total;
}

}  // namespace

double primal_objective(const TransportPlan& plan, const MarkovPrior& prior) {
  if (plan.horizon() != prior.horizon()) throw Error(ErrorCode::kShapeMismatch, "plan and prior horizons differ");
  double total = 0.0;
  for (std::size_t t = 0; t < plan.horizon(); ++t) {
    total += row_scaled_kl(plan.steps[t], prior.steps[t], row_sums(plan.steps[t]).values());
  }
  return total;
}

double subproblem_objective(const TransportPlan& plan, const MarkovPrior& prior,
                            std::span<const double> mu_hat) {
  if (plan.horizon() != prior.horizon()) throw Error(ErrorCode::kShapeMismatch, "plan and prior horizons differ");
  if (mu_hat.size() != prior.n) throw Error(ErrorCode::kShapeMismatch, "mu_hat has wrong length");
  if (plan.horizon() == 0) return 0.0;
  double total = row_scaled_kl(plan.steps[0], prior.steps[0], mu_hat);
  for (std::size_t t = 1; t < plan.horizon(); ++t) {
    total += row_scaled_kl(plan.steps[t], prior.steps[t], row_sums(plan.steps[t]).values());
  }
  return total;
}

namespace {

struct Excess {
  std::size_t t;
  std::size_t i;
  double value;
};

// Rows of the reference prior whose sum differs from 1.
std::vector<Excess> row_sum_excess(const MarkovPrior& prior) {
  std::vector<Excess> out;
  for (std::size_t t = 0; t < prior.horizon(); ++t) {
    const auto rs = row_sums(prior.steps[t]);
    for (std::size_t i = 0; i < prior.n; ++i)
      if (rs[i] != 1.0) out.push_back({t, i, rs[i] - 1.0});
  }
  return out;
}

// sum_t D(M_t | diag(M_t 1) A_t) read off a message-consistent state:
// sum_{t>=1} mu_t^T log u_t - mu_0^T log phi_0 + sum_{t<T} mu_t^T (A_t 1 - 1).
// u_t is 1 off the sensors, so only sensor entries enter the first sum.
double message_objective(const DualState& s, const ObservationModel& obs, const std::vector<Excess>& excess) {
  auto mass = [&s](std::size_t t, std::size_t i) { return s.phi_hat[t][i] * s.u[t][i] * s.phi[t][i]; };
  double total = 0.0;
  for (std::size_t i = 0; i < s.mu_hat.size(); ++i) {
    const double m = mass(0, i);
    if (m > 0.0) total -= m * std::log(s.phi[0][i]);
  }
  for (std::size_t t = 1; t < s.u.size(); ++t) {
    for (std::size_t i : obs.sensors()) {
      const double m = mass(t, i);
      if (m > 0.0) total += m * std::log(s.u[t][i]);
    }
  }
  for (const auto& e : excess) total += mass(e.t, e.i) * e.value;
  return total;
}

}  // namespace

ProximalResult proximal_solve(const MarkovPrior& prior, const ObservationModel& obs,
                              const ObservationSeries& rho, const SolverConfig& config) {
  config.validate(obs.unobserved().size());
  auto reduction = reduce_support(prior, obs, rho);

  ProximalResult out;
  out.removed_transitions = reduction.removed.size();
  out.reduced_prior = std::move(reduction.prior);
  const MarkovPrior& reduced = out.reduced_prior;
  if (out.removed_transitions > 0) {
    log::debug("support reduction removed {} transitions", out.removed_transitions);
  }

  Vector eta = config.eta_init ? *config.eta_init : default_eta_init(obs, rho);
  const auto rho0 = rho.rho.front().values();
  DualState state = DualState::initial(reduced, obs.assemble(rho0, eta));

  const auto excess = row_sum_excess(prior);
  const Vector reach = [&] {
    const std::vector<Vector> ones(prior.horizon() + 1, Vector(prior.n, 1.0));
    return backward_pass(prior, ones).front();
  }();

  for (std::size_t iter = 1;; ++iter) {
    state.mu_hat = obs.assemble(rho0, eta);
    std::size_t sweeps = 0;
    double residual = 0.0;
    if (config.exact) {
      do {
        if (sweeps == config.max_inner_sweeps) {
          throw Error(ErrorCode::kMaxItersExceeded, "inner solve stopped after " + std::to_string(sweeps) +
                                                        " sweeps with residual " + std::to_string(residual));
        }
        bca_sweep(state, reduced, obs, rho, config);
        ++sweeps;
        residual = observation_residual(state, obs, rho);
      } while (!(residual <= config.residual_tol));
    } else {
      for (; sweeps < config.inner_sweeps_per_outer; ++sweeps) bca_sweep(state, reduced, obs, rho, config);
      residual = observation_residual(state, obs, rho);
    }
    out.total_sweeps += sweeps;

    Vector next(obs.unobserved().size());
    for (std::size_t q = 0; q < next.size(); ++q) {
      const std::size_t i = obs.unobserved()[q];
      next[q] = state.mu_hat[i] * state.u[0][i] * state.phi[0][i];
    }
    double constant = 0.0;
    for (std::size_t i = 0; i < prior.n; ++i) constant += state.mu_hat[i] * reach[i];

    TraceRow row;
    row.iter = iter;
    row.eta_change = eta.empty() ? 0.0 : max_abs_diff(next, eta);
    row.primal_obj = message_objective(state, obs, excess);
    row.dual_obj = dual_objective(state, obs, rho) + constant;
    row.residual = residual;
    out.trace.push_back(row);
    log::trace("iter {} eta_change {:.3e} primal {:.6e} residual {:.3e}", iter, row.eta_change,
               row.primal_obj, row.residual);

    eta = std::move(next);
    if (config.on_iterate) config.on_iterate(row, eta);

    if (row.eta_change <= config.outer_tol && row.residual <= config.residual_tol) break;
    if (iter == config.max_outer_iters) {
      throw MaxItersError("proximal loop stopped after " + std::to_string(iter) +
                              " iterations (eta change " + std::to_string(row.eta_change) +
                              ", residual " + std::to_string(row.residual) + ")",
                          std::move(out.trace));
    }
  }

  log::debug("proximal solve finished after {} iterations, {} sweeps", out.trace.size(), out.total_sweeps);
  out.plan = assemble_plan(state, reduced);
  out.eta = std::move(eta);
  out.marginals = state.marginals();
  out.state = std::move(state);
  return out;
}

}  // namespace sbridge
