#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sbridge/tensor.hpp"

namespace sbridge {

enum class NodeKind { kJunction, kSource, kConsumer };

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::kJunction;
  /// Sources with a tank volume get their own state; sources without one only supply water.
  std::optional<double> tank_volume_l;
};

struct PipeSpec {
  std::string id;
  std::string from_node;
  std::string to_node;
  double length_m = 0.0;
  double diameter_mm = 0.0;

  /// Cylinder volume in liters.
  double volume_l() const;
};

enum class StateKind { kSegment, kTank, kExit };

struct StateInfo {
  std::string id;
  StateKind kind = StateKind::kSegment;
  std::size_t pipe = 0;     // kSegment
  std::size_t segment = 0;  // kSegment, 0 at the pipe inlet
  std::size_t node = 0;     // kTank
  double volume_l = 0.0;
};

/// Pipe network with its derived state space.
///
/// States are ordered pipe by pipe (inlet segment first), then one tank state
/// per source node that has a tank volume, then the absorbing exit state.
/// Identifiers are `<pipe_id>#<segment>`, `tank:<node_id>` and `EXIT`.
class NetworkModel {
 public:
  static constexpr double kDefaultSegmentCap = 1.5;

  NetworkModel(std::vector<NodeSpec> nodes, std::vector<PipeSpec> pipes,
               double segment_volume_cap = kDefaultSegmentCap, double time_step_s = 1.0,
               std::vector<std::string> sensors = {});

  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
  const std::vector<PipeSpec>& pipes() const noexcept { return pipes_; }
  const std::vector<StateInfo>& states() const noexcept { return states_; }
  /// Sensor placements as state identifiers, in file order.
  const std::vector<std::string>& sensors() const noexcept { return sensors_; }
  double segment_volume_cap() const noexcept { return cap_; }
  double time_step_s() const noexcept { return dt_; }

  std::size_t state_count() const noexcept { return states_.size(); }
  std::size_t exit_state() const noexcept { return states_.size() - 1; }
  std::size_t segment_count(std::size_t pipe) const { return segment_count_[pipe]; }
  std::size_t segment_state(std::size_t pipe, std::size_t segment) const;
  std::optional<std::size_t> tank_state(std::size_t node) const;

  std::size_t node_index(const std::string& id) const;
  std::size_t pipe_index(const std::string& id) const;
  /// Throws SchemaError listing the valid identifiers when `id` is unknown.
  std::size_t state_index(const std::string& id) const;
  std::vector<std::string> state_ids() const;

  std::size_t pipe_from(std::size_t pipe) const { return pipe_from_[pipe]; }
  std::size_t pipe_to(std::size_t pipe) const { return pipe_to_[pipe]; }
  const std::vector<std::size_t>& out_pipes(std::size_t node) const { return out_pipes_[node]; }
  const std::vector<std::size_t>& in_pipes(std::size_t node) const { return in_pipes_[node]; }

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<PipeSpec> pipes_;
  double cap_;
  double dt_;
  std::vector<std::string> sensors_;

  std::vector<StateInfo> states_;
  std::vector<std::size_t> segment_count_;
  std::vector<std::size_t> first_segment_state_;
  std::vector<std::optional<std::size_t>> tank_state_;
  std::vector<std::size_t> pipe_from_;
  std::vector<std::size_t> pipe_to_;
  std::vector<std::vector<std::size_t>> out_pipes_;
  std::vector<std::vector<std::size_t>> in_pipes_;
  std::unordered_map<std::string, std::size_t> node_lookup_;
  std::unordered_map<std::string, std::size_t> pipe_lookup_;
  std::unordered_map<std::string, std::size_t> state_lookup_;
};

/// Pipe flow rates in liters per second, one vector (indexed like
/// NetworkModel::pipes) per time step t = 0..T-1.
struct FlowSeries {
  double dt_s = 1.0;
  std::vector<Vector> flows;

  std::size_t horizon() const noexcept { return flows.size(); }
};

/// Checks F >= 0 and flow balance at every junction (and inflow >= outflow at
/// consumers) for every time step. Throws FlowImbalance with (t, node) context.
void validate_flows(const NetworkModel& network, const FlowSeries& flows,
                    double relative_tolerance = 1e-6);

}  // namespace sbridge
