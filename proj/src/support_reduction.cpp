#include <string>

#include "sbridge/bridge.hpp"

namespace sbridge {

SupportReduction reduce_support(const MarkovPrior& prior, const ObservationModel& obs,
                                const ObservationSeries& rho) {
  prior.check_shapes();
  if (obs.n() != prior.n) throw Error(ErrorCode::kShapeMismatch, "observation model size != n");
  rho.check(obs.k(), prior.horizon());

  const std::size_t n = prior.n;
  const std::size_t horizon = prior.horizon();
  std::vector<std::vector<bool>> dead(horizon + 1, std::vector<bool>(n, false));
  for (std::size_t t = 0; t <= horizon; ++t)
    for (std::size_t j = 0; j < obs.k(); ++j)
      if (rho.rho[t][j] == 0.0) dead[t][obs.sensors()[j]] = true;

  // Fixed point on the time-expanded graph: a state is forced to zero when all
  // of its successors are (t < T), or when all of its predecessors are (t >= 1).
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t t = horizon; t-- > 0;) {
      const auto& a = prior.steps[t];
      for (std::size_t i = 0; i < n; ++i) {
        if (dead[t][i]) continue;
        bool any_alive = false;
        for (auto j : a.row_cols(i)) any_alive = any_alive || !dead[t + 1][j];
        if (!any_alive) {
          dead[t][i] = true;
          changed = true;
        }
      }
    }
    for (std::size_t t = 1; t <= horizon; ++t) {
      const auto& a = prior.steps[t - 1];
      std::vector<bool> fed(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        if (dead[t - 1][i]) continue;
        for (auto j : a.row_cols(i)) fed[j] = true;
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (!dead[t][j] && !fed[j]) {
          dead[t][j] = true;
          changed = true;
        }
      }
    }
  }

  for (std::size_t t = 0; t <= horizon; ++t) {
    for (std::size_t j = 0; j < obs.k(); ++j) {
      const std::size_t s = obs.sensors()[j];
      if (rho.rho[t][j] > 0.0 && dead[t][s]) {
        throw Error(ErrorCode::kInfeasible,
                    "sensor " + std::to_string(j) + " (state " + prior.state_id(s) + ") reads " +
                        std::to_string(rho.rho[t][j]) + " at t=" + std::to_string(t) +
                        " but the prior support cannot route mass there");
      }
    }
  }

  SupportReduction out;
  out.prior.n = n;
  out.prior.state_ids = prior.state_ids;
  out.forced_zero = dead;
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<Triplet> kept;
    for (const auto& e : prior.steps[t].triplets()) {
      if (dead[t][e.row] || dead[t + 1][e.col]) {
        out.removed.push_back({t, e.row, e.col});
      } else {
        kept.push_back(e);
      }
    }
    out.prior.steps.push_back(NonNegMatrix::from_triplets(n, n, std::move(kept)));
  }
  return out;
}

}  // namespace sbridge
