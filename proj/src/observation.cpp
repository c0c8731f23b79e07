#include "sbridge/observation.hpp"

#include <string>

namespace sbridge {

ObservationModel::ObservationModel(std::size_t n, std::vector<std::size_t> sensors)
    : n_(n), sensors_(std::move(sensors)), slot_(n, -1) {
  if (sensors_.size() > n_) throw Error(ErrorCode::kInvalidArgument, "more sensors than states");
  for (std::size_t j = 0; j < sensors_.size(); ++j) {
    const std::size_t s = sensors_[j];
    if (s >= n_) {
      throw Error(ErrorCode::kInvalidArgument, "sensor index " + std::to_string(s) + " out of range");
    }
    if (slot_[s] >= 0) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate sensor index " + std::to_string(s));
    }
    slot_[s] = static_cast<std::ptrdiff_t>(j);
  }
  for (std::size_t i = 0; i < n_; ++i)
    if (slot_[i] < 0) unobserved_.push_back(i);
}

Vector ObservationModel::select(std::span<const double> x) const {
  if (x.size() != n_) throw Error(ErrorCode::kShapeMismatch, "select: wrong length");
  Vector out;
  out.reserve(k());
  for (auto s : sensors_) out.push_back(x[s]);
  return out;
}

Vector ObservationModel::select_unobserved(std::span<const double> x) const {
  if (x.size() != n_) throw Error(ErrorCode::kShapeMismatch, "select_unobserved: wrong length");
  Vector out;
  out.reserve(unobserved_.size());
  for (auto s : unobserved_) out.push_back(x[s]);
  return out;
}

Vector ObservationModel::assemble(std::span<const double> rho, std::span<const double> eta) const {
  if (rho.size() != k() || eta.size() != unobserved_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "assemble: wrong block lengths");
  }
  Vector x(n_, 0.0);
  for (std::size_t j = 0; j < k(); ++j) x[sensors_[j]] = rho[j];
  for (std::size_t j = 0; j < eta.size(); ++j) x[unobserved_[j]] = eta[j];
  return x;
}

void ObservationSeries::check(std::size_t k, std::size_t horizon) const {
  if (rho.size() != horizon + 1) {
    throw Error(ErrorCode::kShapeMismatch, "expected " + std::to_string(horizon + 1) +
                                               " observation vectors, got " +
                                               std::to_string(rho.size()));
  }
  for (std::size_t t = 0; t < rho.size(); ++t) {
    if (rho[t].size() != k) {
      throw Error(ErrorCode::kShapeMismatch, "observation at t=" + std::to_string(t) + " has " +
                                                 std::to_string(rho[t].size()) + " entries, expected " +
                                                 std::to_string(k));
    }
  }
}

}  // namespace sbridge
