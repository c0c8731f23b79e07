#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbridge/network.hpp"
#include "sbridge/observation.hpp"
#include "sbridge/prior.hpp"

namespace sbridge {

struct Scenario {
  MarkovPrior prior;
  NonNegVector mu0;
  ObservationModel obs{0, {}};
  double injected_total = 0.0;
  /// Multiplicative noise level sigma; none means noiseless readings.
  std::optional<double> noise_level;
  std::uint64_t seed = 0;
};

struct Propagation {
  /// mu_0..mu_T
  std::vector<Vector> marginals;
  ObservationSeries rho;
};

/// mu_{t+1} = A_t^T mu_t and rho_t = C mu_t.
Propagation propagate(const MarkovPrior& prior, std::span<const double> mu0, const ObservationModel& obs);
/// Noiseless propagation followed by the scenario's noise, if any.
Propagation propagate(const Scenario& scenario);

/// rho * max(0, 1 + sigma xi) with xi standard normal drawn from a generator
/// seeded with `seed`.
ObservationSeries add_noise(const ObservationSeries& rho, double sigma, std::uint64_t seed);

/// `grams` spread evenly over the listed states.
struct Injection {
  std::vector<std::string> states;
  double grams = 0.0;
};

Vector injection_vector(const NetworkModel& network, const Injection& injection);

/// Builds the prior, injects the mass and sets up the sensors (state ids;
/// empty means the network's own sensor list).
Scenario make_scenario(const NetworkModel& network, const FlowSeries& flows, const Injection& injection,
                       const std::vector<std::string>& sensors, std::optional<double> noise_level,
                       std::uint64_t seed, const PriorBuildOptions& options = {});

std::vector<std::size_t> sensor_indices(const NetworkModel& network, const std::vector<std::string>& sensors);

}  // namespace sbridge
