#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sbridge/bridge.hpp"

namespace sbridge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

Vector log_of(const Vector& v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), safe_log);
  return out;
}

Vector exp_of(const Vector& v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

// log(A x) from log x.
Vector log_multiply(const NonNegMatrix& a, const Vector& log_x) {
  Vector out(a.rows(), kNegInf);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    double peak = kNegInf;
    for (std::size_t k = 0; k < cols.size(); ++k) peak = std::max(peak, std::log(vals[k]) + log_x[cols[k]]);
    if (peak == kNegInf) continue;
    double acc = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) acc += std::exp(std::log(vals[k]) + log_x[cols[k]] - peak);
    out[i] = peak + std::log(acc);
  }
  return out;
}

// log(A^T x) from log x.
Vector log_multiply_transpose(const NonNegMatrix& a, const Vector& log_x) {
  Vector peak(a.cols(), kNegInf);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (log_x[i] == kNegInf) continue;
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      peak[cols[k]] = std::max(peak[cols[k]], std::log(vals[k]) + log_x[i]);
  }
  Vector acc(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (log_x[i] == kNegInf) continue;
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      acc[cols[k]] += std::exp(std::log(vals[k]) + log_x[i] - peak[cols[k]]);
  }
  Vector out(a.cols(), kNegInf);
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (peak[j] != kNegInf) out[j] = peak[j] + std::log(acc[j]);
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) { return elementwise(ElementwiseOp::kMul, a, b); }

Vector log_add(const Vector& a, const Vector& b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

[[noreturn]] void degenerate(std::size_t t, std::size_t sensor, std::size_t state, double value) {
  throw Error(ErrorCode::kDegenerateUpdate,
              "prior routes no mass to sensor " + std::to_string(sensor) + " (state " +
                  std::to_string(state) + ") at t=" + std::to_string(t) +
                  "; C(phi . phi_hat) = " + std::to_string(value));
}

void check_inputs(const DualState& state, const MarkovPrior& prior, const ObservationModel& obs,
                  const ObservationSeries& rho) {
  if (state.horizon() != prior.horizon() || state.mu_hat.size() != prior.n || obs.n() != prior.n) {
    throw Error(ErrorCode::kShapeMismatch, "dual state, prior and observation model disagree");
  }
  rho.check(obs.k(), prior.horizon());
}

void ensure_log_mirrors(DualState& s) {
  if (s.log_u.size() == s.u.size() && s.log_phi.size() == s.phi.size() && s.log_phi_hat.size() == s.phi_hat.size()) {
    return;
  }
  s.log_u.clear();
  s.log_phi.clear();
  s.log_phi_hat.clear();
  for (const auto& v : s.u) s.log_u.push_back(log_of(v));
  for (const auto& v : s.phi) s.log_phi.push_back(log_of(v));
  for (const auto& v : s.phi_hat) s.log_phi_hat.push_back(log_of(v));
}

void update_linear(DualState& s, const MarkovPrior& prior, const ObservationModel& obs,
                   const ObservationSeries& rho, std::size_t t, double floor, Vector& scratch) {
  auto& u = s.u[t];
  for (std::size_t j = 0; j < obs.k(); ++j) {
    const std::size_t i = obs.sensors()[j];
    const double reading = rho.rho[t][j];
    const double reach = s.phi[t][i] * s.phi_hat[t][i];
    if (reading == 0.0) {
      u[i] = 0.0;
    } else if (!(reach >= floor)) {
      degenerate(t, j, i, reach);
    } else {
      u[i] = reading / reach;
    }
  }
  if (t < prior.horizon()) {
    for (std::size_t i = 0; i < prior.n; ++i) scratch[i] = s.phi_hat[t][i] * u[i];
    prior.steps[t].multiply_transpose_into(scratch, s.phi_hat[t + 1]);
  }
}

void update_log(DualState& s, const MarkovPrior& prior, const ObservationModel& obs,
                const ObservationSeries& rho, std::size_t t, double floor) {
  ensure_log_mirrors(s);
  const double log_floor = std::log(floor);
  auto& lu = s.log_u[t];
  for (std::size_t j = 0; j < obs.k(); ++j) {
    const std::size_t i = obs.sensors()[j];
    const double reading = rho.rho[t][j];
    const double log_reach = s.log_phi[t][i] + s.log_phi_hat[t][i];
    if (reading == 0.0) {
      lu[i] = kNegInf;
    } else if (!(log_reach >= log_floor)) {
      degenerate(t, j, i, std::exp(log_reach));
    } else {
      lu[i] = std::log(reading) - log_reach;
    }
  }
  s.u[t] = exp_of(lu);
  if (t < prior.horizon()) {
    s.log_phi_hat[t + 1] = log_multiply_transpose(prior.steps[t], log_add(s.log_phi_hat[t], lu));
    s.phi_hat[t + 1] = exp_of(s.log_phi_hat[t + 1]);
  }
}

void backward_linear(DualState& s, const MarkovPrior& prior, Vector& scratch) {
  const std::size_t horizon = prior.horizon();
  std::fill(s.phi[horizon].begin(), s.phi[horizon].end(), 1.0);
  for (std::size_t t = horizon; t-- > 0;) {
    for (std::size_t i = 0; i < prior.n; ++i) scratch[i] = s.u[t + 1][i] * s.phi[t + 1][i];
    prior.steps[t].multiply_into(scratch, s.phi[t]);
  }
}

void backward_log(DualState& s, const MarkovPrior& prior) {
  ensure_log_mirrors(s);
  const std::size_t horizon = prior.horizon();
  s.log_phi[horizon].assign(prior.n, 0.0);
  s.phi[horizon].assign(prior.n, 1.0);
  for (std::size_t t = horizon; t-- > 0;) {
    s.log_phi[t] = log_multiply(prior.steps[t], log_add(s.log_u[t + 1], s.log_phi[t + 1]));
    s.phi[t] = exp_of(s.log_phi[t]);
  }
}

void reset_start(DualState& s, bool log_domain) {
  s.phi_hat[0] = s.mu_hat;
  if (log_domain) {
    ensure_log_mirrors(s);
    s.log_phi_hat[0] = log_of(s.mu_hat);
  } else {
    s.log_u.clear();
    s.log_phi.clear();
    s.log_phi_hat.clear();
  }
}

}  // namespace

DualState DualState::initial(const MarkovPrior& prior, Vector mu_hat) {
  if (mu_hat.size() != prior.n) throw Error(ErrorCode::kShapeMismatch, "mu_hat has wrong length");
  DualState s;
  s.u.assign(prior.horizon() + 1, Vector(prior.n, 1.0));
  s.phi = backward_pass(prior, s.u);
  s.phi_hat = forward_pass(prior, s.u, mu_hat);
  s.mu_hat = std::move(mu_hat);
  return s;
}

std::vector<Vector> DualState::lambda(const ObservationModel& obs) const {
  std::vector<Vector> out;
  out.reserve(u.size());
  for (const auto& ut : u) out.push_back(log_of(obs.select(ut)));
  return out;
}

double dual_constraint_excess(const DualState& state, const MarkovPrior& prior) {
  const std::size_t horizon = prior.horizon();
  if (state.horizon() != horizon) throw Error(ErrorCode::kShapeMismatch, "dual state and prior horizons differ");
  Vector w = state.u[horizon];
  Vector next(prior.n);
  for (std::size_t t = horizon; t-- > 0;) {
    prior.steps[t].multiply_into(w, next);
    for (std::size_t i = 0; i < prior.n; ++i) w[i] = state.u[t][i] * next[i];
  }
  double worst = -1.0;
  for (double v : w) worst = std::max(worst, v - 1.0);
  return worst;
}

double full_dual_objective(const DualState& state, const ObservationModel& obs, const ObservationSeries& rho) {
  if (rho.rho.size() != state.u.size()) throw Error(ErrorCode::kShapeMismatch, "observations and dual state differ");
  const auto lambda = state.lambda(obs);
  double total = 0.0;
  for (std::size_t t = 0; t < lambda.size(); ++t) {
    const auto r = rho.rho[t].values();
    for (std::size_t j = 0; j < r.size(); ++j)
      if (r[j] > 0.0) total += lambda[t][j] * r[j];
  }
  return total;
}

std::vector<Vector> DualState::marginals() const {
  std::vector<Vector> out;
  out.reserve(u.size());
  for (std::size_t t = 0; t < u.size(); ++t) out.push_back(hadamard(hadamard(phi_hat[t], u[t]), phi[t]));
  return out;
}

std::vector<Vector> backward_pass(const MarkovPrior& prior, const std::vector<Vector>& u) {
  const std::size_t horizon = prior.horizon();
  if (u.size() != horizon + 1) throw Error(ErrorCode::kShapeMismatch, "need T+1 scalings");
  std::vector<Vector> phi(horizon + 1);
  phi[horizon].assign(prior.n, 1.0);
  for (std::size_t t = horizon; t-- > 0;) phi[t] = prior.steps[t].multiply(hadamard(u[t + 1], phi[t + 1]));
  return phi;
}

std::vector<Vector> forward_pass(const MarkovPrior& prior, const std::vector<Vector>& u,
                                 std::span<const double> mu_hat) {
  const std::size_t horizon = prior.horizon();
  if (u.size() != horizon + 1) throw Error(ErrorCode::kShapeMismatch, "need T+1 scalings");
  std::vector<Vector> phi_hat(horizon + 1);
  phi_hat[0].assign(mu_hat.begin(), mu_hat.end());
  for (std::size_t t = 0; t < horizon; ++t)
    phi_hat[t + 1] = prior.steps[t].multiply_transpose(hadamard(phi_hat[t], u[t]));
  return phi_hat;
}

void bca_update(DualState& state, const MarkovPrior& prior, const ObservationModel& obs,
                const ObservationSeries& rho, std::size_t t, const SolverConfig& config) {
  check_inputs(state, prior, obs, rho);
  if (t > prior.horizon()) throw Error(ErrorCode::kInvalidArgument, "time index out of range");
  if (t == 0) reset_start(state, config.log_domain);
  if (config.log_domain) {
    update_log(state, prior, obs, rho, t, config.degenerate_floor);
  } else {
    Vector scratch(prior.n);
    update_linear(state, prior, obs, rho, t, config.degenerate_floor, scratch);
  }
}

void refresh_backward(DualState& state, const MarkovPrior& prior, const SolverConfig& config) {
  if (state.horizon() != prior.horizon()) throw Error(ErrorCode::kShapeMismatch, "state and prior horizons differ");
  if (config.log_domain) {
    backward_log(state, prior);
  } else {
    Vector scratch(prior.n);
    backward_linear(state, prior, scratch);
  }
}

void bca_sweep(DualState& state, const MarkovPrior& prior, const ObservationModel& obs,
               const ObservationSeries& rho, const SolverConfig& config) {
  check_inputs(state, prior, obs, rho);
  reset_start(state, config.log_domain);
  if (config.log_domain) {
    for (std::size_t t = 0; t <= prior.horizon(); ++t) update_log(state, prior, obs, rho, t, config.degenerate_floor);
    backward_log(state, prior);
  } else {
    Vector scratch(prior.n);
    for (std::size_t t = 0; t <= prior.horizon(); ++t) {
      update_linear(state, prior, obs, rho, t, config.degenerate_floor, scratch);
    }
    backward_linear(state, prior, scratch);
  }
}

double dual_objective(const DualState& state, const ObservationModel& obs,
                      const ObservationSeries& rho, std::size_t at_time) {
  if (at_time > state.horizon()) throw Error(ErrorCode::kInvalidArgument, "time index out of range");
  double linear = 0.0;
  for (std::size_t t = 0; t <= state.horizon(); ++t) {
    for (std::size_t j = 0; j < obs.k(); ++j) {
      const double reading = rho.rho[t][j];
      if (reading == 0.0) continue;
      linear += reading * std::log(state.u[t][obs.sensors()[j]]);
    }
  }
  double total = 0.0;
  const std::size_t t = at_time;
  for (std::size_t i = 0; i < state.mu_hat.size(); ++i)
    total += state.phi[t][i] * state.phi_hat[t][i] * state.u[t][i];
  return linear - total;
}

double dual_constant(const MarkovPrior& prior, std::span<const double> mu_hat) {
  const std::vector<Vector> ones(prior.horizon() + 1, Vector(prior.n, 1.0));
  const auto phi = backward_pass(prior, ones);
  double c = 0.0;
  for (std::size_t i = 0; i < mu_hat.size(); ++i) c += mu_hat[i] * phi[0][i];
  return c;
}

double observation_residual(const DualState& state, const ObservationModel& obs,
                            const ObservationSeries& rho) {
  double worst = 0.0;
  for (std::size_t t = 0; t <= state.horizon(); ++t) {
    for (std::size_t j = 0; j < obs.k(); ++j) {
      const std::size_t i = obs.sensors()[j];
      const double fitted = state.phi_hat[t][i] * state.u[t][i] * state.phi[t][i];
      worst = std::max(worst, std::abs(fitted - rho.rho[t][j]));
    }
  }
  return worst;
}

}  // namespace sbridge
