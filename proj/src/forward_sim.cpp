#include "sbridge/forward_sim.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace sbridge {

Propagation propagate(const MarkovPrior& prior, std::span<const double> mu0, const ObservationModel& obs) {
  prior.check_shapes();
  if (mu0.size() != prior.n || obs.n() != prior.n) throw Error(ErrorCode::kShapeMismatch, "mu0 has wrong length");
  Propagation out;
  out.marginals.emplace_back(mu0.begin(), mu0.end());
  for (const auto& a : prior.steps) out.marginals.push_back(a.multiply_transpose(out.marginals.back()));
  for (const auto& mu : out.marginals) out.rho.rho.emplace_back(obs.select(mu));
  return out;
}

Propagation propagate(const Scenario& scenario) {
  auto out = propagate(scenario.prior, scenario.mu0.values(), scenario.obs);
  if (scenario.noise_level && *scenario.noise_level > 0.0) {
    out.rho = add_noise(out.rho, *scenario.noise_level, scenario.seed);
  }
  return out;
}

ObservationSeries add_noise(const ObservationSeries& rho, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise level must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  ObservationSeries out;
  for (const auto& r : rho.rho) {
    Vector noisy(r.vec());
    for (double& v : noisy) v *= std::max(0.0, 1.0 + sigma * xi(rng));
    out.rho.emplace_back(std::move(noisy));
  }
  return out;
}

Vector injection_vector(const NetworkModel& network, const Injection& injection) {
  if (!(injection.grams >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "injected mass must be >= 0");
  Vector mu(network.state_count(), 0.0);
  if (injection.grams == 0.0) return mu;
  if (injection.states.empty()) throw Error(ErrorCode::kInvalidArgument, "injection needs at least one state");
  std::set<std::size_t> targets;
  for (const auto& id : injection.states) targets.insert(network.state_index(id));
  const double share = injection.grams / static_cast<double>(targets.size());
  for (auto i : targets) mu[i] = share;
  return mu;
}

std::vector<std::size_t> sensor_indices(const NetworkModel& network, const std::vector<std::string>& sensors) {
  std::vector<std::size_t> out;
  for (const auto& id : sensors.empty() ? network.sensors() : sensors) out.push_back(network.state_index(id));
  return out;
}

Scenario make_scenario(const NetworkModel& network, const FlowSeries& flows, const Injection& injection,
                       const std::vector<std::string>& sensors, std::optional<double> noise_level,
                       std::uint64_t seed, const PriorBuildOptions& options) {
  Scenario s;
  s.prior = build_prior(network, flows, options);
  s.mu0 = NonNegVector(injection_vector(network, injection));
  s.obs = ObservationModel(network.state_count(), sensor_indices(network, sensors));
  s.injected_total = s.mu0.sum();
  s.noise_level = noise_level;
  s.seed = seed;
  return s;
}

}  // namespace sbridge
