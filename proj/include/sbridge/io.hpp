#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sbridge/bridge.hpp"
#include "sbridge/network.hpp"
#include "sbridge/observability.hpp"
#include "sbridge/prior.hpp"

namespace sbridge::io {

namespace fs = std::filesystem;

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

NetworkModel read_network(const fs::path& path);
void write_network(const fs::path& path, const NetworkModel& network);

/// `time,pipe_id,flow_lps`, one row per (step, pipe) for steps 0..T-1.
FlowSeries read_flows(const fs::path& path, const NetworkModel& network);
void write_flows(const fs::path& path, const NetworkModel& network, const FlowSeries& flows);

/// `time,sensor_id,mass_g`, one row per (t, sensor) for t = 0..T. When
/// `horizon` is given the file must cover exactly that horizon.
ObservationSeries read_observations(const fs::path& path, const std::vector<std::string>& sensor_ids,
                                    std::optional<std::size_t> horizon = std::nullopt);
void write_observations(const fs::path& path, const std::vector<std::string>& sensor_ids,
                        const ObservationSeries& rho);

/// Prior archive directory: manifest.json, states.csv (`index,state_id`) and
/// transitions.csv (`t,i,j,p`). The manifest may list default sensor ids.
void write_prior_archive(const fs::path& dir, const MarkovPrior& prior, double dt_s,
                         const std::vector<std::string>& sensors = {});
MarkovPrior read_prior_archive(const fs::path& dir);
std::vector<std::string> read_archive_sensors(const fs::path& dir);

/// `t,i,j,mass_g`
void write_plan(const fs::path& path, const TransportPlan& plan);
TransportPlan read_plan(const fs::path& path, std::size_t n);

/// `time,state_id,mass_g`
void write_marginals(const fs::path& path, const std::vector<std::string>& state_ids,
                     const std::vector<Vector>& marginals);
std::vector<Vector> read_marginals(const fs::path& path, const std::vector<std::string>& state_ids);

/// `iter,eta_change,primal_obj,dual_obj,residual`
void write_trace(const fs::path& path, const std::vector<TraceRow>& trace);

nlohmann::json report_json(const ObservabilityReport& report, const std::vector<std::string>& state_ids);

/// Writes `value` pretty-printed with a trailing newline.
void write_json(const fs::path& path, const nlohmann::json& value);
nlohmann::json read_json(const fs::path& path);

}  // namespace sbridge::io
