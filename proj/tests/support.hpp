#pragma once

// Test-side oracles and instance generators. Nothing here calls into the
// solver; each routine is a plain reimplementation used for cross-checks.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sbridge/bridge.hpp"
#include "sbridge/network.hpp"
#include "sbridge/prior.hpp"

namespace testing_support {

using sbridge::MarkovPrior;
using sbridge::NonNegMatrix;
using sbridge::ObservationModel;
using sbridge::ObservationSeries;
using sbridge::Vector;
using Dense = std::vector<Vector>;

inline Dense dense(const NonNegMatrix& m) { return m.to_dense(); }

inline double max_abs(const Dense& a, const Dense& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  return worst;
}

inline double max_abs(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double total(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Scalar KL straight from the definition.
inline double kl_term(double p, double q) {
  if (p == 0.0) return q;
  return p * std::log(p / q) - p + q;
}

/// Rank by Gaussian elimination with partial pivoting.
inline std::size_t gauss_rank(Dense a, double tol) {
  const std::size_t rows = a.size();
  const std::size_t cols = rows ? a[0].size() : 0;
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t pivot = rank;
    for (std::size_t r = rank; r < rows; ++r)
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    if (std::abs(a[pivot][c]) <= tol) continue;
    std::swap(a[pivot], a[rank]);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      const double f = a[r][c] / a[rank][c];
      for (std::size_t k = c; k < cols; ++k) a[r][k] -= f * a[rank][k];
    }
    ++rank;
  }
  return rank;
}

/// Classical two-marginal Sinkhorn: diag(a) K diag(b) with rows r and columns c.
inline Dense sinkhorn(const Dense& k, const Vector& r, const Vector& c, int iters = 20000) {
  const std::size_t n = r.size();
  const std::size_t m = c.size();
  Vector a(n, 1.0), b(m, 1.0);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += k[i][j] * b[j];
      a[i] = r[i] / s;
    }
    double err = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i][j] * a[i];
      err = std::max(err, std::abs(s * b[j] - c[j]));
      b[j] = c[j] / s;
    }
    if (err < 1e-15) break;
  }
  Dense out(n, Vector(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i][j] = a[i] * k[i][j] * b[j];
  return out;
}

/// Fraction of the water in element 0 that ends in each element after one
/// step, by advecting `slugs` equal slugs. The line has unit throughput per
/// step, so element k has volume 1 / S_k.
inline Vector slug_oracle(const Vector& speeds, int slugs = 10000) {
  Vector edges(speeds.size() + 1, 0.0);
  for (std::size_t k = 0; k < speeds.size(); ++k) edges[k + 1] = edges[k] + 1.0 / speeds[k];
  Vector out(speeds.size(), 0.0);
  for (int s = 0; s < slugs; ++s) {
    const double x = edges[1] * (s + 0.5) / slugs + 1.0;
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - edges.begin()) - 1;
    out[std::min(k, speeds.size() - 1)] += 1.0 / slugs;
  }
  return out;
}

/// Random row-stochastic prior with a positive diagonal and roughly `density`
/// off-diagonal fill.
inline MarkovPrior random_prior(std::mt19937_64& rng, std::size_t n, std::size_t horizon, double density) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::bernoulli_distribution keep(density);
  MarkovPrior prior;
  prior.n = n;
  for (std::size_t t = 0; t < horizon; ++t) {
    Dense a(n, Vector(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || keep(rng)) a[i][j] = unit(rng);
        s += a[i][j];
      }
      for (double& v : a[i]) v /= s;
    }
    prior.steps.push_back(NonNegMatrix::from_dense(a));
  }
  return prior;
}

/// Same support as `prior`, each entry scaled by a factor in [1/spread, spread]
/// and rows renormalized. Data generated from it is feasible for `prior` but
/// not consistent with it.
inline MarkovPrior perturbed_prior(std::mt19937_64& rng, const MarkovPrior& prior, double spread) {
  std::uniform_real_distribution<double> f(std::log(1.0 / spread), std::log(spread));
  MarkovPrior out;
  out.n = prior.n;
  for (const auto& step : prior.steps) {
    Dense a = step.to_dense();
    for (auto& row : a) {
      double s = 0.0;
      for (double& v : row) {
        v *= std::exp(f(rng));
        s += v;
      }
      for (double& v : row) v /= s;
    }
    out.steps.push_back(NonNegMatrix::from_dense(a));
  }
  return out;
}

inline std::vector<std::size_t> random_sensors(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  return all;
}

inline Vector random_positive(std::mt19937_64& rng, std::size_t n, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

/// mu_{t+1} = A_t^T mu_t by dense loops.
inline std::vector<Vector> dense_propagate(const MarkovPrior& prior, const Vector& mu0) {
  std::vector<Vector> mu{mu0};
  for (const auto& step : prior.steps) {
    const Dense a = dense(step);
    Vector next(prior.n, 0.0);
    for (std::size_t i = 0; i < prior.n; ++i)
      for (std::size_t j = 0; j < prior.n; ++j) next[j] += a[i][j] * mu.back()[i];
    mu.push_back(next);
  }
  return mu;
}

inline ObservationSeries observe(const std::vector<Vector>& mu, const ObservationModel& obs) {
  ObservationSeries rho;
  for (const auto& m : mu) {
    Vector r;
    for (auto s : obs.sensors()) r.push_back(m[s]);
    rho.rho.emplace_back(r);
  }
  return rho;
}

/// Optimal value of the bridge problem with the whole initial marginal fixed:
/// min KL(Q | P) over path measures Q with Q_0 = mu0 and C Q_t = rho_t for
/// t >= 1, where P is the Markov measure started at mu0. Dense iterative
/// scaling; scalings are kept between calls as a warm start.
class FixedInitialValue {
 public:
  FixedInitialValue(const MarkovPrior& prior, const ObservationModel& obs, const ObservationSeries& rho)
      : obs_(obs), rho_(rho) {
    for (const auto& step : prior.steps) a_.push_back(dense(step));
    n_ = prior.n;
    u_.assign(a_.size() + 1, Vector(n_, 1.0));
  }

  double operator()(const Vector& mu0, double tol = 1e-13, int max_sweeps = 200000) {
    const std::size_t horizon = a_.size();
    std::vector<Vector> fwd(horizon + 1), bwd(horizon + 1);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      bwd[horizon].assign(n_, 1.0);
      for (std::size_t t = horizon; t-- > 0;) bwd[t] = apply(a_[t], times(u_[t + 1], bwd[t + 1]));
      fwd[0] = mu0;
      for (std::size_t i = 0; i < n_; ++i) u_[0][i] = bwd[0][i] > 0.0 ? 1.0 / bwd[0][i] : 1.0;
      double err = 0.0;
      for (std::size_t t = 1; t <= horizon; ++t) {
        fwd[t] = apply_transpose(a_[t - 1], times(fwd[t - 1], u_[t - 1]));
        for (std::size_t j = 0; j < obs_.k(); ++j) {
          const std::size_t s = obs_.sensors()[j];
          const double base = fwd[t][s] * bwd[t][s];
          const double target = rho_.rho[t][j];
          err = std::max(err, std::abs(base * u_[t][s] - target) / std::max(1.0, target));
          u_[t][s] = base > 0.0 ? target / base : 0.0;
        }
      }
      if (err <= tol) break;
    }
    bwd[horizon].assign(n_, 1.0);
    for (std::size_t t = horizon; t-- > 0;) bwd[t] = apply(a_[t], times(u_[t + 1], bwd[t + 1]));
    fwd[0] = mu0;
    for (std::size_t t = 1; t <= horizon; ++t) fwd[t] = apply_transpose(a_[t - 1], times(fwd[t - 1], u_[t - 1]));
    double value = 0.0;
    for (std::size_t t = 0; t <= horizon; ++t) {
      for (std::size_t i = 0; i < n_; ++i) {
        const double q = fwd[t][i] * u_[t][i] * bwd[t][i];
        if (q > 0.0) value += q * std::log(u_[t][i]);
      }
    }
    // KL(Q | P) also carries |P| - |Q|.
    Vector ones(n_, 1.0);
    Vector reach = ones;
    for (std::size_t t = horizon; t-- > 0;) reach = apply(a_[t], reach);
    double p_total = 0.0, q_total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      p_total += mu0[i] * reach[i];
      q_total += fwd[0][i] * u_[0][i] * bwd[0][i];
    }
    return value + p_total - q_total;
  }

 private:
  static Vector times(const Vector& x, const Vector& y) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return out;
  }
  static Vector apply(const Dense& a, const Vector& x) {
    Vector out(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j) out[i] += a[i][j] * x[j];
    return out;
  }
  static Vector apply_transpose(const Dense& a, const Vector& x) {
    Vector out(a.empty() ? 0 : a[0].size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += a[i][j] * x[i];
    return out;
  }

  ObservationModel obs_;
  ObservationSeries rho_;
  std::vector<Dense> a_;
  std::size_t n_ = 0;
  std::vector<Vector> u_;
};

/// A random tree network: a source feeding a line that may split once or
/// twice, every leaf ending in a consumer. Flows are balanced, strictly
/// positive and vary over time.
struct RandomNetwork {
  sbridge::NetworkModel network;
  sbridge::FlowSeries flows;
};

inline RandomNetwork random_network(std::mt19937_64& rng, std::size_t horizon, std::size_t max_states,
                                    double max_length_m = 9.0) {
  using sbridge::NodeKind;
  using sbridge::NodeSpec;
  using sbridge::PipeSpec;
  std::uniform_int_distribution<int> branches_d(1, 3);
  std::uniform_real_distribution<double> length_d(4.0, max_length_m);
  std::uniform_real_distribution<double> share_d(0.3, 0.7);
  std::uniform_real_distribution<double> flow_d(0.3, 0.9);
  std::uniform_real_distribution<double> wobble_d(0.8, 1.2);
  for (;;) {
    std::vector<NodeSpec> nodes{{"S", NodeKind::kSource, std::nullopt}, {"J0", NodeKind::kJunction, std::nullopt}};
    std::vector<PipeSpec> pipes{{"P0", "S", "J0", length_d(rng), 20.0}};
    const int leaves = branches_d(rng);
    Vector shares;
    double share_sum = 0.0;
    for (int b = 0; b < leaves; ++b) {
      const std::string mid = "J" + std::to_string(b + 1);
      const std::string leaf = "C" + std::to_string(b + 1);
      nodes.push_back({mid, NodeKind::kJunction, std::nullopt});
      nodes.push_back({leaf, NodeKind::kConsumer, std::nullopt});
      pipes.push_back({"B" + std::to_string(b + 1), "J0", mid, length_d(rng), 13.0});
      pipes.push_back({"L" + std::to_string(b + 1), mid, leaf, length_d(rng), 13.0});
      shares.push_back(share_d(rng));
      share_sum += shares.back();
    }
    sbridge::NetworkModel net(nodes, pipes, 1.5, 1.0);
    if (net.state_count() > max_states) continue;
    sbridge::FlowSeries flows;
    flows.dt_s = 1.0;
    const double base = flow_d(rng);
    for (std::size_t t = 0; t < horizon; ++t) {
      const double f = base * wobble_d(rng);
      Vector row(pipes.size());
      row[0] = f;
      for (int b = 0; b < leaves; ++b) {
        row[1 + 2 * b] = f * shares[b] / share_sum;
        row[2 + 2 * b] = f * shares[b] / share_sum;
      }
      flows.flows.push_back(row);
    }
    return {std::move(net), std::move(flows)};
  }
}

}  // namespace testing_support
