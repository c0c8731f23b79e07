#include "sbridge/prior.hpp"

#include <algorithm>
#include <cmath>

namespace sbridge {

std::string MarkovPrior::state_id(std::size_t i) const {
  return i < state_ids.size() ? state_ids[i] : std::to_string(i);
}

double MarkovPrior::max_row_sum_error() const {
  double err = 0.0;
  for (const auto& a : steps)
    for (std::size_t i = 0; i < a.rows(); ++i) err = std::max(err, std::abs(sum(a.row_values(i)) - 1.0));
  return err;
}

void MarkovPrior::check_shapes() const {
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].rows() != n || steps[t].cols() != n) {
      throw Error(ErrorCode::kShapeMismatch, "prior step " + std::to_string(t) + " is not " +
                                                 std::to_string(n) + "x" + std::to_string(n));
    }
  }
  if (!state_ids.empty() && state_ids.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "state id count differs from n");
  }
}

double normalized_speed(double flow_lps, double dt_s, double volume_l) {
  if (!(volume_l > 0.0)) {
    throw Error(ErrorCode::kInvalidVolume, "volume must be > 0, got " + std::to_string(volume_l));
  }
  if (!(flow_lps >= 0.0) || !(dt_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need flow >= 0 and dt > 0");
  }
  return flow_lps * dt_s / volume_l;
}

namespace {

struct Boundary {
  std::size_t element;  // == speeds.size() when the boundary reached the sink
  double fraction;      // position inside that element, in [0, 1)
};

// Where a water particle ends after one step when it starts at the inlet of
// element `first` of the line: sum_{k=first}^{m-1} 1/S_k + fraction/S_m = 1.
Boundary locate(std::span<const double> speeds, std::size_t first) {
  double elapsed = 0.0;
  for (std::size_t k = first; k < speeds.size(); ++k) {
    const double crossing = 1.0 / speeds[k];
    if (elapsed + crossing > 1.0) return {k, speeds[k] * (1.0 - elapsed)};
    elapsed += crossing;
  }
  return {speeds.size(), 0.0};
}

}  // namespace

Vector line_transitions(std::span<const double> speeds, bool terminal_sink) {
  if (speeds.empty()) throw Error(ErrorCode::kInvalidArgument, "empty line");
  const std::size_t n = speeds.size();
  Vector a(terminal_sink ? n + 1 : n, 0.0);
  if (!(speeds[0] >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative speed");
  if (speeds[0] == 0.0) {
    a[0] = 1.0;
    return a;
  }

  double downstream_time = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    if (!(speeds[k] > 0.0)) {
      throw Error(ErrorCode::kHypothesisViolated,
                  "stagnant element " + std::to_string(k) + " inside the traversed line");
    }
    downstream_time += 1.0 / speeds[k];
  }
  if (!terminal_sink && !(downstream_time > 1.0)) {
    throw Error(ErrorCode::kHypothesisViolated,
                "water leaves the line within one step (sum 1/S_k = " +
                    std::to_string(downstream_time) + "); extend it with the absorbing state");
  }

  // Upstream boundary of element 0 (n1, alpha) and its downstream boundary (n2, beta).
  const Boundary upstream = locate(speeds, 0);
  const Boundary downstream = locate(speeds, 1);
  const std::size_t n1 = upstream.element;
  const std::size_t n2 = downstream.element;
  const double alpha = upstream.fraction;
  const double beta = downstream.fraction;
  const double s1 = speeds[0];

  if (n1 == n2) {
    a[std::min(n1, a.size() - 1)] = 1.0;
    return a;
  }
  a[n1] = (1.0 - alpha) * s1 / speeds[n1];
  for (std::size_t k = n1 + 1; k < std::min(n2, n); ++k) a[k] = s1 / speeds[k];
  if (n2 < n) {
    a[n2] = beta * s1 / speeds[n2];
  } else {
    double placed = 0.0;
    for (std::size_t k = 0; k < n; ++k) placed += a[k];
    a[n] = std::max(0.0, 1.0 - placed);
  }
  return a;
}

namespace {

struct Element {
  std::size_t state;
  double speed;
};

class PathWalker {
 public:
  PathWalker(const NetworkModel& network, const FlowSeries& flows, std::size_t t,
             const PriorBuildOptions& options)
      : net_(network), flow_(flows.flows.at(t)), dt_(flows.dt_s), opt_(options),
        row_(network.state_count(), 0.0) {}

  Vector run(std::size_t state) {
    const auto& info = net_.states()[state];
    if (info.kind == StateKind::kExit) {
      row_[state] = 1.0;
      return std::move(row_);
    }
    if (info.kind == StateKind::kSegment) {
      const double s = normalized_speed(flow_[info.pipe], dt_, info.volume_l);
      if (s == 0.0) {
        row_[state] = 1.0;
        return std::move(row_);
      }
      path_.push_back({state, s});
      walk_pipe(info.pipe, info.segment + 1, 1.0, 0.0);
    } else {
      double out = 0.0;
      for (auto p : net_.out_pipes(info.node)) out += flow_[p];
      const double s = normalized_speed(out, dt_, info.volume_l);
      if (s == 0.0) {
        row_[state] = 1.0;
        return std::move(row_);
      }
      path_.push_back({state, s});
      walk_node(info.node, 1.0, 0.0);
    }
    return std::move(row_);
  }

 private:
  void walk_pipe(std::size_t pipe, std::size_t first_segment, double weight, double elapsed) {
    const std::size_t pushed_before = path_.size();
    const std::size_t m = net_.segment_count(pipe);
    for (std::size_t s = first_segment; s < m; ++s) {
      const std::size_t state = net_.segment_state(pipe, s);
      const double speed = normalized_speed(flow_[pipe], dt_, net_.states()[state].volume_l);
      push({state, speed});
      elapsed += 1.0 / speed;
      if (elapsed > 1.0) {
        accumulate(weight, false);
        path_.resize(pushed_before);
        return;
      }
    }
    walk_node(net_.pipe_to(pipe), weight, elapsed);
    path_.resize(pushed_before);
  }

  void walk_node(std::size_t node, double weight, double elapsed) {
    double out = 0.0;
    for (auto p : net_.out_pipes(node)) out += flow_[p];
    double in = 0.0;
    for (auto p : net_.in_pipes(node)) in += flow_[p];
    const double demand =
        net_.nodes()[node].kind == NodeKind::kConsumer ? std::max(0.0, in - out) : 0.0;
    const double total = out + demand;
    if (!(total > 0.0)) {
      throw Error(ErrorCode::kTopologyError,
                  "water reaches node '" + net_.nodes()[node].id + "' which has no outflow");
    }
    for (auto p : net_.out_pipes(node)) {
      if (flow_[p] > 0.0) walk_pipe(p, 0, weight * flow_[p] / total, elapsed);
    }
    if (demand > 0.0) accumulate(weight * demand / total, true);
  }

  void push(Element e) {
    if (path_.size() >= opt_.max_path_length) {
      throw Error(ErrorCode::kTopologyError,
                  "path exceeds " + std::to_string(opt_.max_path_length) +
                      " elements without leaving the network (cycle?)");
    }
    path_.push_back(e);
  }

  void accumulate(double weight, bool into_exit) {
    if (++paths_ > opt_.max_paths) {
      throw Error(ErrorCode::kTopologyError, "too many branch paths");
    }
    speeds_.clear();
    for (const auto& e : path_) speeds_.push_back(e.speed);
    const Vector a = line_transitions(speeds_, into_exit);
    for (std::size_t k = 0; k < path_.size(); ++k) row_[path_[k].state] += weight * a[k];
    if (into_exit) row_[net_.exit_state()] += weight * a.back();
  }

  const NetworkModel& net_;
  const Vector& flow_;
  double dt_;
  const PriorBuildOptions& opt_;
  Vector row_;
  std::vector<Element> path_;
  Vector speeds_;
  std::size_t paths_ = 0;
};

}  // namespace

NonNegVector pipe_row(const NetworkModel& network, const FlowSeries& flows, std::size_t t,
                      std::size_t state, const PriorBuildOptions& options) {
  if (t >= flows.horizon()) throw Error(ErrorCode::kInvalidArgument, "time index out of range");
  if (state >= network.state_count()) throw Error(ErrorCode::kInvalidArgument, "state out of range");
  return NonNegVector(PathWalker(network, flows, t, options).run(state));
}

MarkovPrior build_prior(const NetworkModel& network, const FlowSeries& flows,
                        const PriorBuildOptions& options) {
  validate_flows(network, flows, options.flow_balance_tolerance);
  MarkovPrior prior;
  prior.n = network.state_count();
  prior.state_ids = network.state_ids();
  prior.steps.reserve(flows.horizon());
  for (std::size_t t = 0; t < flows.horizon(); ++t) {
    std::vector<Triplet> trip;
    for (std::size_t i = 0; i < prior.n; ++i) {
      try {
        const auto row = pipe_row(network, flows, t, i, options);
        for (std::size_t j = 0; j < prior.n; ++j)
          if (row[j] > 0.0) trip.push_back({i, j, row[j]});
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " [t=" + std::to_string(t) + ", state " +
                                  network.states()[i].id + "]");
      }
    }
    prior.steps.push_back(NonNegMatrix::from_triplets(prior.n, prior.n, std::move(trip)));
  }
  return prior;
}

}  // namespace sbridge
