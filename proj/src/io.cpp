#include "sbridge/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace sbridge::io {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const fs::path& path, std::size_t line, const std::string& what) {
  std::string where = path.string();
  if (line > 0) where += ":" + std::to_string(line);
  throw Error(ErrorCode::kSchemaError, where + ": " + what);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

/// Header-checked CSV reader that remembers line numbers for error messages.
class CsvReader {
 public:
  CsvReader(const fs::path& path, const std::vector<std::string>& header) : path_(path), in_(path) {
    if (!in_) schema_error(path_, 0, "cannot open file");
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!trim(line).empty()) break;
    }
    const auto got = split(line);
    if (got != header) {
      std::string want;
      for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
      schema_error(path_, line_, "expected header '" + want + "'");
    }
    width_ = header.size();
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (trim(line).empty()) continue;
      fields = split(line);
      if (fields.size() != width_) {
        fail("expected " + std::to_string(width_) + " fields, got " + std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  std::size_t index(const std::string& s) const {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("'" + s + "' is not a nonnegative integer");
    return v;
  }

  double number(const std::string& s) const {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail("'" + s + "' is not a finite number");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const { schema_error(path_, line_, what); }
  std::size_t line() const { return line_; }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::size_t width_ = 0;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kSchemaError, path.string() + ": cannot write file");
  return out;
}

NodeKind parse_kind(const std::string& s, const fs::path& path) {
  if (s == "junction") return NodeKind::kJunction;
  if (s == "source") return NodeKind::kSource;
  if (s == "consumer") return NodeKind::kConsumer;
  schema_error(path, 0, "unknown node kind '" + s + "' (junction, source, consumer)");
}

std::string kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::kSource:
      return "source";
    case NodeKind::kConsumer:
      return "consumer";
    default:
      return "junction";
  }
}

template <typename T>
T required(const json& obj, const char* key, const fs::path& path, const std::string& where) {
  if (!obj.contains(key)) schema_error(path, 0, where + " is missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    schema_error(path, 0, where + ": '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) schema_error(path, 0, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    schema_error(path, 0, e.what());
  }
}

void write_json(const fs::path& path, const json& value) {
  auto out = open_out(path);
  out << value.dump(2) << '\n';
}

NetworkModel read_network(const fs::path& path) {
  const json doc = read_json(path);
  if (!doc.is_object()) schema_error(path, 0, "top level must be an object");
  std::vector<NodeSpec> nodes;
  std::vector<PipeSpec> pipes;
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) schema_error(path, 0, "'nodes' array required");
  if (!doc.contains("pipes") || !doc["pipes"].is_array()) schema_error(path, 0, "'pipes' array required");
  for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
    const auto& n = doc["nodes"][i];
    const std::string where = "nodes[" + std::to_string(i) + "]";
    NodeSpec spec;
    spec.id = required<std::string>(n, "id", path, where);
    spec.kind = parse_kind(required<std::string>(n, "kind", path, where), path);
    if (n.contains("tank_volume_l")) spec.tank_volume_l = required<double>(n, "tank_volume_l", path, where);
    nodes.push_back(std::move(spec));
  }
  for (std::size_t i = 0; i < doc["pipes"].size(); ++i) {
    const auto& p = doc["pipes"][i];
    const std::string where = "pipes[" + std::to_string(i) + "]";
    PipeSpec spec;
    spec.id = required<std::string>(p, "id", path, where);
    spec.from_node = required<std::string>(p, "from", path, where);
    spec.to_node = required<std::string>(p, "to", path, where);
    spec.length_m = required<double>(p, "length_m", path, where);
    spec.diameter_mm = required<double>(p, "diameter_mm", path, where);
    pipes.push_back(std::move(spec));
  }
  const double cap = doc.contains("segment_volume_cap_l")
                         ? required<double>(doc, "segment_volume_cap_l", path, "network")
                         : NetworkModel::kDefaultSegmentCap;
  const double dt = doc.contains("time_step_s") ? required<double>(doc, "time_step_s", path, "network") : 1.0;
  std::vector<std::string> sensors;
  if (doc.contains("sensors")) sensors = required<std::vector<std::string>>(doc, "sensors", path, "network");
  try {
    return NetworkModel(std::move(nodes), std::move(pipes), cap, dt, std::move(sensors));
  } catch (const Error& e) {
    schema_error(path, 0, e.what());
  }
}

void write_network(const fs::path& path, const NetworkModel& network) {
  json doc;
  doc["segment_volume_cap_l"] = network.segment_volume_cap();
  doc["time_step_s"] = network.time_step_s();
  doc["nodes"] = json::array();
  for (const auto& n : network.nodes()) {
    json node{{"id", n.id}, {"kind", kind_name(n.kind)}};
    if (n.tank_volume_l) node["tank_volume_l"] = *n.tank_volume_l;
    doc["nodes"].push_back(std::move(node));
  }
  doc["pipes"] = json::array();
  for (const auto& p : network.pipes()) {
    doc["pipes"].push_back({{"id", p.id},
                            {"from", p.from_node},
                            {"to", p.to_node},
                            {"length_m", p.length_m},
                            {"diameter_mm", p.diameter_mm}});
  }
  doc["sensors"] = network.sensors();
  write_json(path, doc);
}

FlowSeries read_flows(const fs::path& path, const NetworkModel& network) {
  CsvReader csv(path, {"time", "pipe_id", "flow_lps"});
  std::map<std::size_t, std::map<std::size_t, double>> rows;
  std::vector<std::string> f;
  while (csv.next(f)) {
    const std::size_t t = csv.index(f[0]);
    std::size_t pipe = 0;
    try {
      pipe = network.pipe_index(f[1]);
    } catch (const Error&) {
      csv.fail("unknown pipe '" + f[1] + "'");
    }
    const double q = csv.number(f[2]);
    if (q < 0.0) csv.fail("negative flow");
    if (!rows[t].emplace(pipe, q).second) csv.fail("duplicate row for t=" + f[0] + ", pipe " + f[1]);
  }
  if (rows.empty()) schema_error(path, 0, "flow file has no data rows");
  FlowSeries flows;
  flows.dt_s = network.time_step_s();
  const std::size_t steps = rows.rbegin()->first + 1;
  for (std::size_t t = 0; t < steps; ++t) {
    Vector v(network.pipes().size(), 0.0);
    for (std::size_t p = 0; p < v.size(); ++p) {
      const auto row = rows.find(t);
      if (row == rows.end() || !row->second.contains(p)) {
        schema_error(path, 0, "missing flow for t=" + std::to_string(t) + ", pipe " + network.pipes()[p].id);
      }
      v[p] = row->second.at(p);
    }
    flows.flows.push_back(std::move(v));
  }
  return flows;
}

void write_flows(const fs::path& path, const NetworkModel& network, const FlowSeries& flows) {
  auto out = open_out(path);
  out << "time,pipe_id,flow_lps\n";
  for (std::size_t t = 0; t < flows.horizon(); ++t)
    for (std::size_t p = 0; p < network.pipes().size(); ++p)
      out << t << ',' << network.pipes()[p].id << ',' << format_number(flows.flows[t][p]) << '\n';
}

ObservationSeries read_observations(const fs::path& path, const std::vector<std::string>& sensor_ids,
                                    std::optional<std::size_t> horizon) {
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t j = 0; j < sensor_ids.size(); ++j) slot.emplace(sensor_ids[j], j);
  CsvReader csv(path, {"time", "sensor_id", "mass_g"});
  std::map<std::size_t, std::map<std::size_t, double>> rows;
  std::vector<std::string> f;
  while (csv.next(f)) {
    const std::size_t t = csv.index(f[0]);
    const auto it = slot.find(f[1]);
    if (it == slot.end()) csv.fail("'" + f[1] + "' is not a sensor");
    const double m = csv.number(f[2]);
    if (m < 0.0) csv.fail("negative mass");
    if (!rows[t].emplace(it->second, m).second) csv.fail("duplicate row for t=" + f[0] + ", sensor " + f[1]);
  }
  if (rows.empty()) schema_error(path, 0, "observation file has no data rows");
  const std::size_t last = horizon ? *horizon : rows.rbegin()->first;
  if (rows.rbegin()->first > last) {
    schema_error(path, 0, "observation at t=" + std::to_string(rows.rbegin()->first) +
                              " is beyond the horizon T=" + std::to_string(last));
  }
  ObservationSeries rho;
  for (std::size_t t = 0; t <= last; ++t) {
    Vector v(sensor_ids.size(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const auto row = rows.find(t);
      if (row == rows.end() || !row->second.contains(j)) {
        schema_error(path, 0, "missing observation for t=" + std::to_string(t) + ", sensor " + sensor_ids[j]);
      }
      v[j] = row->second.at(j);
    }
    rho.rho.emplace_back(std::move(v));
  }
  return rho;
}

void write_observations(const fs::path& path, const std::vector<std::string>& sensor_ids,
                        const ObservationSeries& rho) {
  auto out = open_out(path);
  out << "time,sensor_id,mass_g\n";
  for (std::size_t t = 0; t < rho.rho.size(); ++t)
    for (std::size_t j = 0; j < sensor_ids.size(); ++j)
      out << t << ',' << sensor_ids[j] << ',' << format_number(rho.rho[t][j]) << '\n';
}

void write_prior_archive(const fs::path& dir, const MarkovPrior& prior, double dt_s,
                         const std::vector<std::string>& sensors) {
  fs::create_directories(dir);
  write_json(dir / "manifest.json",
             json{{"n", prior.n}, {"horizon", prior.horizon()}, {"time_step_s", dt_s}, {"sensors", sensors}});
  {
    auto out = open_out(dir / "states.csv");
    out << "index,state_id\n";
    for (std::size_t i = 0; i < prior.n; ++i) out << i << ',' << prior.state_id(i) << '\n';
  }
  auto out = open_out(dir / "transitions.csv");
  out << "t,i,j,p\n";
  for (std::size_t t = 0; t < prior.horizon(); ++t)
    for (const auto& e : prior.steps[t].triplets())
      out << t << ',' << e.row << ',' << e.col << ',' << format_number(e.value) << '\n';
}

MarkovPrior read_prior_archive(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const json manifest = read_json(manifest_path);
  MarkovPrior prior;
  prior.n = required<std::size_t>(manifest, "n", manifest_path, "manifest");
  const auto horizon = required<std::size_t>(manifest, "horizon", manifest_path, "manifest");

  {
    CsvReader csv(dir / "states.csv", {"index", "state_id"});
    std::vector<std::string> f;
    prior.state_ids.resize(prior.n);
    std::size_t seen = 0;
    while (csv.next(f)) {
      const std::size_t i = csv.index(f[0]);
      if (i != seen || i >= prior.n) csv.fail("state indices must run 0..n-1 in order");
      prior.state_ids[i] = f[1];
      ++seen;
    }
    if (seen != prior.n) schema_error(dir / "states.csv", 0, "expected " + std::to_string(prior.n) + " states");
  }

  std::vector<std::vector<Triplet>> entries(horizon);
  CsvReader csv(dir / "transitions.csv", {"t", "i", "j", "p"});
  std::vector<std::string> f;
  while (csv.next(f)) {
    const std::size_t t = csv.index(f[0]);
    const std::size_t i = csv.index(f[1]);
    const std::size_t j = csv.index(f[2]);
    const double p = csv.number(f[3]);
    if (t >= horizon || i >= prior.n || j >= prior.n) csv.fail("index out of range");
    if (p < 0.0) csv.fail("negative probability");
    entries[t].push_back({i, j, p});
  }
  for (auto& e : entries) prior.steps.push_back(NonNegMatrix::from_triplets(prior.n, prior.n, std::move(e)));
  return prior;
}

std::vector<std::string> read_archive_sensors(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  const json manifest = read_json(path);
  if (!manifest.contains("sensors")) return {};
  return required<std::vector<std::string>>(manifest, "sensors", path, "manifest");
}

void write_plan(const fs::path& path, const TransportPlan& plan) {
  auto out = open_out(path);
  out << "t,i,j,mass_g\n";
  for (std::size_t t = 0; t < plan.horizon(); ++t)
    for (const auto& e : plan.steps[t].triplets())
      out << t << ',' << e.row << ',' << e.col << ',' << format_number(e.value) << '\n';
}

TransportPlan read_plan(const fs::path& path, std::size_t n) {
  CsvReader csv(path, {"t", "i", "j", "mass_g"});
  std::map<std::size_t, std::vector<Triplet>> entries;
  std::vector<std::string> f;
  while (csv.next(f)) {
    const std::size_t i = csv.index(f[1]);
    const std::size_t j = csv.index(f[2]);
    if (i >= n || j >= n) csv.fail("index out of range");
    entries[csv.index(f[0])].push_back({i, j, csv.number(f[3])});
  }
  TransportPlan plan;
  const std::size_t horizon = entries.empty() ? 0 : entries.rbegin()->first + 1;
  for (std::size_t t = 0; t < horizon; ++t) plan.steps.push_back(NonNegMatrix::from_triplets(n, n, entries[t]));
  return plan;
}

void write_marginals(const fs::path& path, const std::vector<std::string>& state_ids,
                     const std::vector<Vector>& marginals) {
  auto out = open_out(path);
  out << "time,state_id,mass_g\n";
  for (std::size_t t = 0; t < marginals.size(); ++t)
    for (std::size_t i = 0; i < state_ids.size(); ++i)
      out << t << ',' << state_ids[i] << ',' << format_number(marginals[t][i]) << '\n';
}

std::vector<Vector> read_marginals(const fs::path& path, const std::vector<std::string>& state_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < state_ids.size(); ++i) index.emplace(state_ids[i], i);
  CsvReader csv(path, {"time", "state_id", "mass_g"});
  std::vector<Vector> out;
  std::vector<std::string> f;
  while (csv.next(f)) {
    const std::size_t t = csv.index(f[0]);
    const auto it = index.find(f[1]);
    if (it == index.end()) csv.fail("unknown state '" + f[1] + "'");
    if (t >= out.size()) out.resize(t + 1, Vector(state_ids.size(), 0.0));
    out[t][it->second] = csv.number(f[2]);
  }
  return out;
}

void write_trace(const fs::path& path, const std::vector<TraceRow>& trace) {
  auto out = open_out(path);
  out << "iter,eta_change,primal_obj,dual_obj,residual\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << format_number(r.eta_change) << ',' << format_number(r.primal_obj) << ','
        << format_number(r.dual_obj) << ',' << format_number(r.residual) << '\n';
  }
}

json report_json(const ObservabilityReport& report, const std::vector<std::string>& state_ids) {
  json doc;
  doc["n"] = state_ids.size();
  doc["rank"] = report.rank;
  doc["is_unique"] = report.is_unique;
  doc["kernel_basis"] = report.kernel_basis;
  json hidden = json::array();
  for (auto i : report.unobservable_downstream_set) hidden.push_back(state_ids.at(i));
  doc["unobservable_downstream_set"] = std::move(hidden);
  return doc;
}

}  // namespace sbridge::io
