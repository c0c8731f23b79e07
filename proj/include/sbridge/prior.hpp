#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sbridge/network.hpp"
#include "sbridge/tensor.hpp"

namespace sbridge {

/// Time-indexed Markov prior: steps[t] is the n x n transition matrix A_t.
struct MarkovPrior {
  std::size_t n = 0;
  std::vector<NonNegMatrix> steps;
  /// Optional human-readable identifiers, one per state.
  std::vector<std::string> state_ids;

  std::size_t horizon() const noexcept { return steps.size(); }
  std::string state_id(std::size_t i) const;
  /// Largest |row sum - 1| over all rows of all steps.
  double max_row_sum_error() const;
  /// Throws ShapeMismatch unless every step is n x n.
  void check_shapes() const;
};

/// S = F dt / V, the fraction of the volume V that is replaced during one step.
double normalized_speed(double flow_lps, double dt_s, double volume_l);

/// Distribution of the water in element 0 of a line of elements with
/// normalized speeds `speeds` after one time step.
///
/// Element k of the result is the fraction that ends in element k. When
/// `terminal_sink` is true the line drains into an absorbing sink and the
/// result has one extra trailing entry for it; otherwise the downstream part
/// of the line must be long enough to hold the water (sum_{k>=1} 1/S_k > 1).
/// A stagnant first element returns the unit row e_0.
Vector line_transitions(std::span<const double> speeds, bool terminal_sink = false);

struct PriorBuildOptions {
  double flow_balance_tolerance = 1e-6;
  /// Guards against runaway path enumeration on pathological inputs.
  std::size_t max_path_length = 100000;
  std::size_t max_paths = 1000000;
};

/// Row of A_t for `state`: branch paths downstream of the state are enumerated
/// depth first, each treated as a line, and combined with the flow split
/// fractions at every bifurcation. Water that leaves through a consumer lands
/// in the exit state.
NonNegVector pipe_row(const NetworkModel& network, const FlowSeries& flows, std::size_t t,
                      std::size_t state, const PriorBuildOptions& options = {});

MarkovPrior build_prior(const NetworkModel& network, const FlowSeries& flows,
                        const PriorBuildOptions& options = {});

}  // namespace sbridge
