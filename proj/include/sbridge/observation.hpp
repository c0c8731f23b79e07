#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sbridge/tensor.hpp"

namespace sbridge {

/// Ordered sensor index set. The selector C picks x[sensors[j]]; its
/// complement picks the remaining states in ascending order.
class ObservationModel {
 public:
  ObservationModel(std::size_t n, std::vector<std::size_t> sensors);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return sensors_.size(); }
  const std::vector<std::size_t>& sensors() const noexcept { return sensors_; }
  const std::vector<std::size_t>& unobserved() const noexcept { return unobserved_; }
  bool is_observed(std::size_t state) const { return slot_[state] >= 0; }
  /// Position of `state` in the sensor list, or -1.
  std::ptrdiff_t slot(std::size_t state) const { return slot_[state]; }

  /// C x
  Vector select(std::span<const double> x) const;
  /// C̄ x
  Vector select_unobserved(std::span<const double> x) const;
  /// C^T rho + C̄^T eta
  Vector assemble(std::span<const double> rho, std::span<const double> eta) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> sensors_;
  std::vector<std::size_t> unobserved_;
  std::vector<std::ptrdiff_t> slot_;
};

/// Sensor readings rho_t for t = 0..T, each of length k.
struct ObservationSeries {
  std::vector<NonNegVector> rho;

  std::size_t horizon() const noexcept { return rho.empty() ? 0 : rho.size() - 1; }
  /// Throws ShapeMismatch unless there are T+1 vectors of length k.
  void check(std::size_t k, std::size_t horizon) const;
};

}  // namespace sbridge
