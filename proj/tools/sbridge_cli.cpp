// Command-line front end: build-prior, solve, observability, simulate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbridge/bridge.hpp"
#include "sbridge/forward_sim.hpp"
#include "sbridge/io.hpp"
#include "sbridge/observability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbridge;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kInfeasibleExit = 2, kNotConvergedExit = 3, kInputError = 4 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasible:
    case ErrorCode::kDegenerateUpdate:
      return kInfeasibleExit;
    case ErrorCode::kNotConverged:
    case ErrorCode::kMaxItersExceeded:
      return kNotConvergedExit;
    case ErrorCode::kSchemaError:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidVolume:
    case ErrorCode::kHypothesisViolated:
    case ErrorCode::kTopologyError:
    case ErrorCode::kFlowImbalance:
    case ErrorCode::kNegativeMass:
    case ErrorCode::kSupportViolation:
      return kInputError;
    default:
      return kInternal;
  }
}

struct ModelInput {
  std::string prior_dir;
  std::string network;
  std::string flows;
  std::vector<std::string> sensors;
  std::size_t max_path_length = PriorBuildOptions{}.max_path_length;
};

void add_model_options(CLI::App* cmd, ModelInput& in) {
  cmd->add_option("--prior", in.prior_dir, "Prior archive directory written by build-prior")->check(CLI::ExistingDirectory);
  cmd->add_option("--network", in.network, "Network JSON")->check(CLI::ExistingFile);
  cmd->add_option("--flows", in.flows, "Flow CSV (time,pipe_id,flow_lps)")->check(CLI::ExistingFile);
  cmd->add_option("--sensors", in.sensors, "Sensor state ids (default: from the network or archive)")->delimiter(',');
  cmd->add_option("--max-path-length", in.max_path_length, "Path enumeration guard for the prior builder");
}

struct LoadedModel {
  MarkovPrior prior;
  std::vector<std::string> sensor_ids;
  double dt_s = 1.0;
};

LoadedModel load_model(const ModelInput& in) {
  LoadedModel out;
  if (!in.prior_dir.empty()) {
    if (!in.network.empty() || !in.flows.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "give either --prior or --network/--flows, not both");
    }
    out.prior = io::read_prior_archive(in.prior_dir);
    out.dt_s = io::read_json(fs::path(in.prior_dir) / "manifest.json").value("time_step_s", 1.0);
    out.sensor_ids = in.sensors.empty() ? io::read_archive_sensors(in.prior_dir) : in.sensors;
  } else {
    if (in.network.empty() || in.flows.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "need --prior or both --network and --flows");
    }
    const auto network = io::read_network(in.network);
    const auto flows = io::read_flows(in.flows, network);
    PriorBuildOptions options;
    options.max_path_length = in.max_path_length;
    out.prior = build_prior(network, flows, options);
    out.dt_s = network.time_step_s();
    out.sensor_ids = in.sensors.empty() ? network.sensors() : in.sensors;
  }
  return out;
}

ObservationModel make_obs(const MarkovPrior& prior, const std::vector<std::string>& sensor_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < prior.n; ++i) index.emplace(prior.state_id(i), i);
  std::vector<std::size_t> sensors;
  for (const auto& id : sensor_ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::kSchemaError, "sensor '" + id + "' is not a state id");
    sensors.push_back(it->second);
  }
  return ObservationModel(prior.n, std::move(sensors));
}

std::vector<std::string> all_ids(const MarkovPrior& prior) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < prior.n; ++i) ids.push_back(prior.state_id(i));
  return ids;
}

int cmd_build_prior(const ModelInput& in, const std::string& out_dir) {
  if (in.network.empty() || in.flows.empty()) throw Error(ErrorCode::kInvalidArgument, "need --network and --flows");
  const auto model = load_model(in);
  io::write_prior_archive(out_dir, model.prior, model.dt_s, model.sensor_ids);
  std::cout << "n=" << model.prior.n << " horizon=" << model.prior.horizon() << '\n';
  return kOk;
}

struct SolveFlags {
  std::string observations;
  std::string out_dir;
  bool exact = false;
  std::size_t inner_sweeps = 2;
  double outer_tol = 1e-8;
  double residual_tol = 1e-9;
  std::size_t max_iters = SolverConfig{}.max_outer_iters;
  std::string eta_init = "uniform";
  std::string eta_file;
  bool canonicalize = false;
  std::uint64_t seed = 0;
  bool log_domain = false;
  double rank_tol = 0.0;
};

Vector eta_from_file(const std::string& path, const MarkovPrior& prior, const ObservationModel& obs) {
  const auto ids = all_ids(prior);
  const auto rows = io::read_marginals(path, ids);
  if (rows.size() != 1) throw Error(ErrorCode::kSchemaError, path + ": eta file must hold time 0 only");
  return obs.select_unobserved(rows.front());
}

int cmd_solve(const ModelInput& in, const SolveFlags& flags) {
  const auto model = load_model(in);
  const auto& prior = model.prior;
  const auto obs = make_obs(prior, model.sensor_ids);
  const auto rho = io::read_observations(flags.observations, model.sensor_ids, prior.horizon());

  SolverConfig config;
  config.exact = flags.exact;
  config.inner_sweeps_per_outer = flags.inner_sweeps;
  config.outer_tol = flags.outer_tol;
  config.residual_tol = flags.residual_tol;
  config.max_outer_iters = flags.max_iters;
  config.log_domain = flags.log_domain;
  if (flags.eta_init == "file") {
    if (flags.eta_file.empty()) throw Error(ErrorCode::kInvalidArgument, "--eta-init file needs --eta-file");
    config.eta_init = eta_from_file(flags.eta_file, prior, obs);
  } else if (flags.eta_init == "random") {
    auto eta = default_eta_init(obs, rho);
    std::mt19937_64 rng(flags.seed);
    std::uniform_real_distribution<double> factor(0.5, 1.5);
    for (double& v : eta) v *= factor(rng);
    config.eta_init = eta;
  }

  const fs::path out = flags.out_dir;
  ProximalResult result;
  try {
    result = proximal_solve(prior, obs, rho, config);
  } catch (const MaxItersError& e) {
    io::write_trace(out / "trace.csv", e.trace());
    throw;
  }

  const auto report = analyze_observability(result.reduced_prior, obs,
                                            flags.rank_tol > 0.0 ? std::optional(flags.rank_tol) : std::nullopt);
  TransportPlan plan = result.plan;
  std::vector<Vector> marginals = result.marginals;
  std::string canonical_note = "not requested";
  bool canonicalized = false;
  if (flags.canonicalize) {
    try {
      const auto controlled = controlled_prior(result.state, result.reduced_prior);
      plan = canonicalize(result.plan, report, controlled, obs);
      if (plan.horizon() > 0) marginals = plan.marginals();
      canonicalized = true;
      canonical_note = report.is_unique ? "unique solution" : "initial mass removed from downstream unobserved states";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotCanonicalizable) throw;
      std::cerr << "warning: " << e.what() << "; plan returned unchanged\n";
      canonical_note = e.what();
    }
  }

  const auto ids = all_ids(prior);
  io::write_marginals(out / "marginals.csv", ids, marginals);
  io::write_plan(out / "plan.csv", plan);
  io::write_trace(out / "trace.csv", result.trace);

  const auto& last = result.trace.back();
  json summary;
  summary["n"] = prior.n;
  summary["horizon"] = prior.horizon();
  summary["sensors"] = model.sensor_ids;
  summary["total_estimated_mass_g"] = sum(marginals.front());
  summary["eta"] = obs.select_unobserved(marginals.front());
  summary["objective"] = plan.horizon() > 0 ? primal_objective(plan, prior) : 0.0;
  summary["residual"] = last.residual;
  summary["matching_error"] = plan.max_matching_error();
  summary["iterations"] = result.trace.size();
  summary["total_inner_sweeps"] = result.total_sweeps;
  summary["removed_transitions"] = result.removed_transitions;
  summary["mode"] = flags.exact ? "exact" : "inexact";
  summary["is_unique"] = report.is_unique;
  summary["rank"] = report.rank;
  summary["kernel_dimension"] = report.kernel_basis.size();
  json hidden = json::array();
  for (auto i : report.unobservable_downstream_set) hidden.push_back(ids[i]);
  summary["unobservable_downstream_set"] = std::move(hidden);
  summary["canonicalized"] = canonicalized;
  summary["canonicalization"] = canonical_note;
  io::write_json(out / "summary.json", summary);
  io::write_json(out / "observability.json", io::report_json(report, ids));

  std::cout << "mass_t0=" << io::format_number(sum(marginals.front()))
            << " objective=" << io::format_number(summary["objective"].get<double>())
            << " iterations=" << result.trace.size() << " unique=" << (report.is_unique ? "yes" : "no") << '\n';
  return kOk;
}

int cmd_observability(const ModelInput& in, const std::string& out_path, double rank_tol) {
  const auto model = load_model(in);
  const auto obs = make_obs(model.prior, model.sensor_ids);
  const auto report = analyze_observability(model.prior, obs, rank_tol > 0.0 ? std::optional(rank_tol) : std::nullopt);
  const auto doc = io::report_json(report, all_ids(model.prior));
  if (out_path.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    io::write_json(out_path, doc);
  }
  return kOk;
}

struct SimulateFlags {
  std::vector<std::string> inject;
  std::string inject_pipe;
  double mass = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_simulate(const ModelInput& in, const SimulateFlags& flags) {
  if (in.network.empty() || in.flows.empty()) throw Error(ErrorCode::kInvalidArgument, "need --network and --flows");
  const auto network = io::read_network(in.network);
  const auto flows = io::read_flows(in.flows, network);

  Injection injection{flags.inject, flags.mass};
  if (!flags.inject_pipe.empty()) {
    const auto pipe = network.pipe_index(flags.inject_pipe);
    for (std::size_t s = 0; s < network.segment_count(pipe); ++s)
      injection.states.push_back(network.states()[network.segment_state(pipe, s)].id);
  }
  PriorBuildOptions options;
  options.max_path_length = in.max_path_length;
  const auto scenario = make_scenario(network, flows, injection, in.sensors,
                                      flags.noise > 0.0 ? std::optional(flags.noise) : std::nullopt, flags.seed,
                                      options);
  const auto run = propagate(scenario);
  const auto sensor_ids = in.sensors.empty() ? network.sensors() : in.sensors;

  const fs::path out = flags.out_dir;
  fs::create_directories(out);
  io::write_network(out / "network.json", network);
  io::write_flows(out / "flows.csv", network, flows);
  io::write_observations(out / "observations.csv", sensor_ids, run.rho);
  io::write_marginals(out / "ground_truth.csv", network.state_ids(), run.marginals);
  json manifest;
  manifest["seed"] = flags.seed;
  manifest["noise_level"] = flags.noise;
  manifest["injected_total_g"] = scenario.injected_total;
  manifest["injection_states"] = injection.states;
  manifest["sensors"] = sensor_ids;
  manifest["n"] = network.state_count();
  manifest["horizon"] = scenario.prior.horizon();
  manifest["files"] = {{"network", "network.json"},
                       {"flows", "flows.csv"},
                       {"observations", "observations.csv"},
                       {"ground_truth", "ground_truth.csv"}};
  io::write_json(out / "manifest.json", manifest);
  std::cout << "n=" << network.state_count() << " horizon=" << scenario.prior.horizon()
            << " injected=" << io::format_number(scenario.injected_total) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-observation Schrodinger bridge tools for contaminant source reconstruction"};
  app.require_subcommand(1);

  ModelInput build_in;
  std::string build_out;
  auto* build = app.add_subcommand("build-prior", "Build the Markov prior from a network and flow series");
  add_model_options(build, build_in);
  build->add_option("--out", build_out, "Output archive directory")->required();

  ModelInput solve_in;
  SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "Reconstruct the contaminant trajectory from sensor readings");
  add_model_options(solve, solve_in);
  solve->add_option("--observations", solve_flags.observations, "Observation CSV (time,sensor_id,mass_g)")
      ->required()
      ->check(CLI::ExistingFile);
  solve->add_option("--out", solve_flags.out_dir, "Output directory")->required();
  solve->add_flag("--exact", solve_flags.exact, "Solve every proximal subproblem to the residual tolerance");
  solve->add_option("--inner-sweeps", solve_flags.inner_sweeps, "Sweeps per outer iteration in inexact mode")
      ->check(CLI::PositiveNumber);
  solve->add_option("--outer-tol", solve_flags.outer_tol, "Stop when the eta change falls below this")
      ->check(CLI::PositiveNumber);
  solve->add_option("--residual-tol", solve_flags.residual_tol, "Accepted observation residual")
      ->check(CLI::PositiveNumber);
  solve->add_option("--max-iters", solve_flags.max_iters, "Outer iteration cap")->check(CLI::PositiveNumber);
  solve->add_option("--eta-init", solve_flags.eta_init, "Starting unobserved mass")
      ->check(CLI::IsMember({"uniform", "file", "random"}));
  solve->add_option("--eta-file", solve_flags.eta_file, "time,state_id,mass_g rows for t=0 (with --eta-init file)");
  solve->add_flag("--canonicalize", solve_flags.canonicalize, "Remove initial mass from downstream unobserved states");
  solve->add_option("--seed", solve_flags.seed, "Seed for --eta-init random");
  solve->add_flag("--log-domain", solve_flags.log_domain, "Run the message recursions in log space");
  solve->add_option("--rank-tol", solve_flags.rank_tol, "Absolute rank tolerance for the observability test");

  ModelInput obs_in;
  std::string obs_out;
  double obs_rank_tol = 0.0;
  auto* observability = app.add_subcommand("observability", "Rank and kernel of the observability matrix");
  add_model_options(observability, obs_in);
  observability->add_option("--out", obs_out, "Report JSON (default: stdout)");
  observability->add_option("--rank-tol", obs_rank_tol, "Absolute rank tolerance");

  ModelInput sim_in;
  SimulateFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic scenario bundle");
  add_model_options(simulate, sim_in);
  simulate->add_option("--inject", sim_flags.inject, "State ids receiving the injected mass")->delimiter(',');
  simulate->add_option("--inject-pipe", sim_flags.inject_pipe, "Spread the mass over every segment of this pipe");
  simulate->add_option("--mass", sim_flags.mass, "Injected mass in grams")->check(CLI::NonNegativeNumber);
  simulate->add_option("--noise", sim_flags.noise, "Multiplicative noise level")->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", sim_flags.seed, "Noise seed");
  simulate->add_option("--out", sim_flags.out_dir, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*build) return cmd_build_prior(build_in, build_out);
    if (*solve) return cmd_solve(solve_in, solve_flags);
    if (*observability) return cmd_observability(obs_in, obs_out, obs_rank_tol);
    if (*simulate) return cmd_simulate(sim_in, sim_flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
