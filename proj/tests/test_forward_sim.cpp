#include <gtest/gtest.h>

#include <random>

#include "sbridge/forward_sim.hpp"
#include "sbridge/io.hpp"
#include "support.hpp"

using namespace sbridge;
namespace ts = testing_support;

namespace {

MarkovPrior chain(const ts::Dense& a) {
  MarkovPrior p;
  p.n = a.size();
  p.steps.push_back(NonNegMatrix::from_dense(a));
  return p;
}

NetworkModel lab_network(const char* name) {
  return io::read_network(std::string(SBRIDGE_DATA_DIR) + "/" + name + "/network.json");
}

FlowSeries lab_flows(const char* name, const NetworkModel& net) {
  return io::read_flows(std::string(SBRIDGE_DATA_DIR) + "/" + name + "/flows.csv", net);
}

}  // namespace

TEST(ForwardSim, ZeroMassGivesZeroReadings) {
  std::mt19937_64 rng(1);
  const auto prior = ts::random_prior(rng, 5, 4, 0.4);
  const auto out = propagate(prior, Vector(5, 0.0), ObservationModel(5, {1, 3}));
  for (const auto& r : out.rho.rho) EXPECT_EQ(r.sum(), 0.0);
}

TEST(ForwardSim, Example1) {
  const auto out = propagate(chain({{0.5, 0.5}, {0.0, 1.0}}), Vector{2.0, 0.0}, ObservationModel(2, {0}));
  EXPECT_EQ(out.marginals[1], (Vector{1.0, 1.0}));
  EXPECT_EQ(out.rho.rho[0][0], 2.0);
  EXPECT_EQ(out.rho.rho[1][0], 1.0);
}

TEST(ForwardSim, Example2) {
  const auto out = propagate(chain({{0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}, {0.0, 0.0, 1.0}}), Vector{2.0, 0.0, 0.0},
                             ObservationModel(3, {2}));
  EXPECT_EQ(out.rho.rho[0][0], 0.0);
  EXPECT_EQ(out.rho.rho[1][0], 1.0);
}

TEST(ForwardSim, MassIsConservedAndMatchesDenseOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto prior = ts::random_prior(rng, 8, 10, 0.3);
    const auto mu0 = ts::random_positive(rng, 8);
    const auto out = propagate(prior, mu0, ObservationModel(8, {0}));
    const auto oracle = ts::dense_propagate(prior, mu0);
    for (std::size_t t = 0; t < out.marginals.size(); ++t) {
      EXPECT_NEAR(ts::total(out.marginals[t]), ts::total(mu0), 1e-10 * ts::total(mu0));
      EXPECT_LE(ts::max_abs(out.marginals[t], oracle[t]), 1e-12);
    }
  }
}

TEST(ForwardSim, NoiseIsSeededAndClipped) {
  ObservationSeries rho;
  for (int t = 0; t < 50; ++t) rho.rho.push_back(NonNegVector{1.0, 2.0});
  const auto a = add_noise(rho, 0.5, 7);
  const auto b = add_noise(rho, 0.5, 7);
  const auto c = add_noise(rho, 0.5, 8);
  bool differs = false;
  for (std::size_t t = 0; t < 50; ++t) {
    EXPECT_EQ(a.rho[t], b.rho[t]);
    differs = differs || !(a.rho[t] == c.rho[t]);
    EXPECT_GE(a.rho[t][0], 0.0);
  }
  EXPECT_TRUE(differs);
  const auto silent = add_noise(rho, 0.0, 3);
  for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(silent.rho[t], rho.rho[t]);
}

TEST(ForwardSim, TankScenario) {
  const auto net = lab_network("table1a");
  const auto flows = lab_flows("table1a", net);
  const auto s = make_scenario(net, flows, {{"tank:P1"}, 150.0}, {}, std::nullopt, 0);
  EXPECT_DOUBLE_EQ(s.injected_total, 150.0);
  EXPECT_DOUBLE_EQ(s.mu0.sum(), 150.0);
  EXPECT_EQ(s.obs.k(), 2u);
  const auto out = propagate(s);
  for (const auto& r : out.rho.rho) EXPECT_LE(r.sum(), 150.0 + 1e-9);
  double seen = 0.0;
  for (const auto& r : out.rho.rho) seen += r.sum();
  EXPECT_GT(seen, 0.0);
}

TEST(ForwardSim, PipeScenario) {
  const auto net = lab_network("table1b");
  const auto flows = lab_flows("table1b", net);
  std::vector<std::string> segments;
  const auto pipe = net.pipe_index("J1J2a");
  for (std::size_t s = 0; s < net.segment_count(pipe); ++s) segments.push_back(net.states()[net.segment_state(pipe, s)].id);
  const auto sc = make_scenario(net, flows, {segments, 40.0}, {}, std::nullopt, 0);
  EXPECT_NEAR(sc.mu0.sum(), 40.0, 1e-12);
  const auto out = propagate(sc);
  std::size_t nonzero = 0;
  for (const auto& r : out.rho.rho)
    for (double v : r.values()) nonzero += v > 1e-12;
  EXPECT_GT(nonzero, 0u);
  EXPECT_LT(nonzero, out.rho.rho.size() * 2);
}

TEST(ForwardSim, ZeroInjection) {
  const auto net = lab_network("table1a");
  const auto s = make_scenario(net, lab_flows("table1a", net), {{}, 0.0}, {}, std::nullopt, 0);
  for (const auto& r : propagate(s).rho.rho) EXPECT_EQ(r.sum(), 0.0);
}

TEST(ForwardSim, UnknownInjectionStateListsValidIds) {
  const auto net = lab_network("table1a");
  try {
    injection_vector(net, {{"nowhere"}, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
    EXPECT_NE(std::string(e.what()).find("tank:P1"), std::string::npos);
  }
}
