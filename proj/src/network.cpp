#include "sbridge/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sbridge {

double PipeSpec::volume_l() const {
  const double radius_m = diameter_mm / 2000.0;
  return std::numbers::pi * radius_m * radius_m * length_m * 1000.0;
}

NetworkModel::NetworkModel(std::vector<NodeSpec> nodes, std::vector<PipeSpec> pipes,
                           double segment_volume_cap, double time_step_s,
                           std::vector<std::string> sensors)
    : nodes_(std::move(nodes)),
      pipes_(std::move(pipes)),
      cap_(segment_volume_cap),
      dt_(time_step_s),
      sensors_(std::move(sensors)) {
  if (!(cap_ > 0.0)) throw Error(ErrorCode::kSchemaError, "segment_volume_cap must be > 0");
  if (!(dt_ > 0.0)) throw Error(ErrorCode::kSchemaError, "time_step_s must be > 0");

  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (!node_lookup_.emplace(nodes_[v].id, v).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate node id '" + nodes_[v].id + "'");
    }
    if (nodes_[v].tank_volume_l) {
      if (nodes_[v].kind != NodeKind::kSource) {
        throw Error(ErrorCode::kSchemaError, "only source nodes may carry a tank: " + nodes_[v].id);
      }
      if (!(*nodes_[v].tank_volume_l > 0.0)) {
        throw Error(ErrorCode::kSchemaError, "tank volume must be > 0 at " + nodes_[v].id);
      }
    }
  }
  out_pipes_.resize(nodes_.size());
  in_pipes_.resize(nodes_.size());

  for (std::size_t p = 0; p < pipes_.size(); ++p) {
    const auto& pipe = pipes_[p];
    if (!pipe_lookup_.emplace(pipe.id, p).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate pipe id '" + pipe.id + "'");
    }
    if (!(pipe.length_m > 0.0) || !(pipe.diameter_mm > 0.0)) {
      throw Error(ErrorCode::kSchemaError, "pipe '" + pipe.id + "' needs length > 0 and diameter > 0");
    }
    const auto from = node_lookup_.find(pipe.from_node);
    const auto to = node_lookup_.find(pipe.to_node);
    if (from == node_lookup_.end() || to == node_lookup_.end()) {
      throw Error(ErrorCode::kSchemaError, "pipe '" + pipe.id + "' references an unknown node");
    }
    if (nodes_[to->second].kind == NodeKind::kSource) {
      throw Error(ErrorCode::kSchemaError, "pipe '" + pipe.id + "' flows into source node");
    }
    pipe_from_.push_back(from->second);
    pipe_to_.push_back(to->second);
    out_pipes_[from->second].push_back(p);
    in_pipes_[to->second].push_back(p);
  }

  for (std::size_t p = 0; p < pipes_.size(); ++p) {
    const double volume = pipes_[p].volume_l();
    const auto count = static_cast<std::size_t>(std::ceil(volume / cap_ - 1e-12));
    segment_count_.push_back(std::max<std::size_t>(count, 1));
    first_segment_state_.push_back(states_.size());
    const double seg_volume = volume / static_cast<double>(segment_count_.back());
    for (std::size_t s = 0; s < segment_count_.back(); ++s) {
      states_.push_back({pipes_[p].id + "#" + std::to_string(s), StateKind::kSegment, p, s, 0,
                         seg_volume});
    }
  }
  tank_state_.assign(nodes_.size(), std::nullopt);
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (nodes_[v].tank_volume_l) {
      tank_state_[v] = states_.size();
      states_.push_back({"tank:" + nodes_[v].id, StateKind::kTank, 0, 0, v, *nodes_[v].tank_volume_l});
    }
  }
  states_.push_back({"EXIT", StateKind::kExit, 0, 0, 0, 0.0});

  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!state_lookup_.emplace(states_[i].id, i).second) {
      throw Error(ErrorCode::kSchemaError, "state id collision: '" + states_[i].id + "'");
    }
  }
  for (const auto& s : sensors_) state_index(s);
}

std::size_t NetworkModel::segment_state(std::size_t pipe, std::size_t segment) const {
  return first_segment_state_.at(pipe) + segment;
}

std::optional<std::size_t> NetworkModel::tank_state(std::size_t node) const {
  return tank_state_.at(node);
}

std::size_t NetworkModel::node_index(const std::string& id) const {
  const auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) throw Error(ErrorCode::kSchemaError, "unknown node '" + id + "'");
  return it->second;
}

std::size_t NetworkModel::pipe_index(const std::string& id) const {
  const auto it = pipe_lookup_.find(id);
  if (it == pipe_lookup_.end()) throw Error(ErrorCode::kSchemaError, "unknown pipe '" + id + "'");
  return it->second;
}

std::size_t NetworkModel::state_index(const std::string& id) const {
  const auto it = state_lookup_.find(id);
  if (it == state_lookup_.end()) {
    std::string valid;
    for (const auto& s : states_) valid += (valid.empty() ? "" : ", ") + s.id;
    throw Error(ErrorCode::kSchemaError, "unknown state id '" + id + "'; valid ids: " + valid);
  }
  return it->second;
}

std::vector<std::string> NetworkModel::state_ids() const {
  std::vector<std::string> ids;
  ids.reserve(states_.size());
  for (const auto& s : states_) ids.push_back(s.id);
  return ids;
}

void validate_flows(const NetworkModel& network, const FlowSeries& flows,
                    double relative_tolerance) {
  if (!(flows.dt_s > 0.0)) throw Error(ErrorCode::kSchemaError, "flow time step must be > 0");
  const auto& pipes = network.pipes();
  for (std::size_t t = 0; t < flows.horizon(); ++t) {
    const auto& f = flows.flows[t];
    if (f.size() != pipes.size()) {
      throw Error(ErrorCode::kSchemaError, "flows at t=" + std::to_string(t) + " cover " +
                                               std::to_string(f.size()) + " of " +
                                               std::to_string(pipes.size()) + " pipes");
    }
    for (std::size_t p = 0; p < f.size(); ++p) {
      if (!(f[p] >= 0.0) || !std::isfinite(f[p])) {
        throw Error(ErrorCode::kFlowImbalance, "negative or non-finite flow in pipe '" +
                                                   pipes[p].id + "' at t=" + std::to_string(t));
      }
    }
    for (std::size_t v = 0; v < network.nodes().size(); ++v) {
      const auto& node = network.nodes()[v];
      double in = 0.0;
      double out = 0.0;
      for (auto p : network.in_pipes(v)) in += f[p];
      for (auto p : network.out_pipes(v)) out += f[p];
      const double scale = std::max({in, out, 1e-300});
      const bool ok = node.kind == NodeKind::kJunction   ? std::abs(in - out) <= relative_tolerance * scale
                      : node.kind == NodeKind::kConsumer ? out - in <= relative_tolerance * scale
                                                         : true;
      if (!ok) {
        throw Error(ErrorCode::kFlowImbalance,
                    "node '" + node.id + "' at t=" + std::to_string(t) + ": inflow " +
                        std::to_string(in) + " L/s vs outflow " + std::to_string(out) + " L/s");
      }
    }
  }
}

}  // namespace sbridge
