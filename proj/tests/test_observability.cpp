#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sbridge/observability.hpp"
#include "support.hpp"

using namespace sbridge;
namespace ts = testing_support;

namespace {

MarkovPrior chain(std::vector<ts::Dense> steps) {
  MarkovPrior p;
  p.n = steps.front().size();
  for (const auto& a : steps) p.steps.push_back(NonNegMatrix::from_dense(a));
  return p;
}

MarkovPrior example1() { return chain({{{0.5, 0.5}, {0.0, 1.0}}}); }
MarkovPrior example2() { return chain({{{0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}, {0.0, 0.0, 1.0}}}); }

ObservationSeries series(std::vector<Vector> rows) {
  ObservationSeries s;
  for (auto& r : rows) s.rho.emplace_back(std::move(r));
  return s;
}

ts::Dense to_dense(const Eigen::MatrixXd& m) {
  ts::Dense out(m.rows(), Vector(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

// Largest |C mu_t - rho_t| and matching error of a plan.
double constraint_error(const TransportPlan& plan, const ObservationModel& obs, const ObservationSeries& rho) {
  double worst = plan.max_matching_error();
  const auto mu = plan.marginals();
  for (std::size_t t = 0; t < mu.size(); ++t)
    for (std::size_t j = 0; j < obs.k(); ++j)
      worst = std::max(worst, std::abs(mu[t][obs.sensors()[j]] - rho.rho[t][j]));
  return worst;
}

MarkovPrior as_prior(const std::vector<NonNegMatrix>& steps, std::size_t n) {
  MarkovPrior p;
  p.n = n;
  p.steps = steps;
  return p;
}

}  // namespace

TEST(Observability, Example1Matrix) {
  const auto o = observability_matrix(example1(), ObservationModel(2, {0}));
  EXPECT_LE(ts::max_abs(to_dense(o), ts::Dense{{1.0, 0.0}, {0.5, 0.0}}), 1e-15);
  const auto report = analyze_observability(example1(), ObservationModel(2, {0}));
  EXPECT_EQ(report.rank, 1u);
  EXPECT_FALSE(report.is_unique);
  ASSERT_EQ(report.kernel_basis.size(), 1u);
  EXPECT_LE(max_principal_angle(report.kernel_basis, {{0.0, 1.0}}), 1e-8);
  EXPECT_EQ(report.unobservable_downstream_set, (std::vector<std::size_t>{1}));
}

TEST(Observability, Example2Matrix) {
  const auto o = observability_matrix(example2(), ObservationModel(3, {2}));
  EXPECT_LE(ts::max_abs(to_dense(o), ts::Dense{{0, 0, 1}, {0.5, 0.5, 1}}), 1e-15);
  const auto report = analyze_observability(example2(), ObservationModel(3, {2}));
  EXPECT_EQ(report.rank, 2u);
  ASSERT_EQ(report.kernel_basis.size(), 1u);
  EXPECT_LE(max_principal_angle(report.kernel_basis, {{1.0, -1.0, 0.0}}), 1e-8);
  EXPECT_TRUE(report.unobservable_downstream_set.empty());
}

TEST(Observability, FullObservationIsUnique) {
  std::mt19937_64 rng(1);
  const auto prior = ts::random_prior(rng, 6, 3, 0.3);
  const auto report = analyze_observability(prior, ObservationModel(6, {0, 1, 2, 3, 4, 5}));
  EXPECT_TRUE(report.is_unique);
  EXPECT_EQ(report.rank, 6u);
  EXPECT_TRUE(report.unobservable_downstream_set.empty());
}

TEST(Observability, RankAgreesWithGaussianElimination) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = 2 + trial % 6;
    const int cols = 5;
    const int true_rank = 1 + trial % std::min(rows, cols);
    // Low-rank product of random factors.
    Eigen::MatrixXd l(rows, true_rank), r(true_rank, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < true_rank; ++j) l(i, j) = u(rng);
    for (int i = 0; i < true_rank; ++i)
      for (int j = 0; j < cols; ++j) r(i, j) = u(rng);
    const Eigen::MatrixXd o = l * r;
    const auto report = kernel_and_rank(o);
    EXPECT_EQ(report.rank, ts::gauss_rank(to_dense(o), 1e-9));
    EXPECT_EQ(report.rank + report.kernel_basis.size(), 5u);
    EXPECT_EQ(report.is_unique, report.kernel_basis.empty());
    for (const auto& v : report.kernel_basis) {
      Eigen::Map<const Eigen::VectorXd> x(v.data(), 5);
      EXPECT_NEAR(x.norm(), 1.0, 1e-12);
      EXPECT_LE((o * x).norm(), 1e-10);
    }
  }
}

TEST(Observability, FullRankSquareStackIsUnique) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd o(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) o(i, j) = u(rng);
  ASSERT_EQ(ts::gauss_rank(to_dense(o), 1e-12), 5u);
  const auto report = kernel_and_rank(o);
  EXPECT_TRUE(report.is_unique);
  EXPECT_TRUE(report.kernel_basis.empty());
}

TEST(Observability, KernelIsDeterministic) {
  std::mt19937_64 rng(4);
  const auto prior = ts::random_prior(rng, 6, 2, 0.2);
  const ObservationModel obs(6, {1});
  const auto a = analyze_observability(prior, obs);
  const auto b = analyze_observability(prior, obs);
  EXPECT_EQ(a.kernel_basis, b.kernel_basis);
}

TEST(Observability, DownstreamSetIsZeroColumnsAndForwardInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto prior = ts::random_prior(rng, 7, 1 + trial % 4, 0.15);
    const ObservationModel obs(7, ts::random_sensors(rng, 7, 1 + trial % 3));
    const auto o = observability_matrix(prior, obs);
    const auto hidden = downstream_unobserved_set(o, prior, obs);
    for (std::size_t i = 0; i < 7; ++i) {
      const bool zero = o.col(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff() == 0.0;
      EXPECT_EQ(zero, std::find(hidden.begin(), hidden.end(), i) != hidden.end());
    }
    // Mass in a hidden state never reaches a sensor, so every successor of a
    // hidden state at t = 0 is hidden from t = 1 on.
    if (prior.horizon() > 0) {
      for (auto i : hidden)
        for (auto j : prior.steps[0].row_cols(i)) EXPECT_FALSE(obs.is_observed(j));
    }
  }
}

TEST(Observability, PrincipalAngles) {
  EXPECT_NEAR(max_principal_angle({{1, 0, 0}}, {{0, 1, 0}}), M_PI / 2, 1e-15);
  EXPECT_NEAR(max_principal_angle({{1, 1, 0}}, {{2, 2, 0}}), 0.0, 1e-8);
  EXPECT_NEAR(max_principal_angle({{1, 0, 0}, {0, 1, 0}}, {{1, 1, 0}, {1, -1, 0}}), 0.0, 1e-8);
  EXPECT_NEAR(max_principal_angle({}, {}), 0.0, 0.0);
  EXPECT_NEAR(max_principal_angle({{1, 0}}, {}), M_PI / 2, 0.0);
}

TEST(Controlled, UnitScalingsKeepThePrior) {
  std::mt19937_64 rng(6);
  const auto prior = ts::random_prior(rng, 5, 3, 0.4);
  const auto state = DualState::initial(prior, ts::random_positive(rng, 5));
  const auto calA = controlled_prior(state, prior);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_LE(ts::max_abs(calA[t].to_dense(), prior.steps[t].to_dense()), 1e-14);
}

TEST(Controlled, Example1AtTheOptimum) {
  const auto prior = example1();
  const ObservationModel obs(2, {0});
  const auto res = proximal_solve(prior, obs, series({{2.0}, {1.0}}));
  const auto calA = controlled_prior(res.state, res.reduced_prior);
  EXPECT_LE(ts::max_abs(calA[0].to_dense(), prior.steps[0].to_dense()), 1e-10);
}

TEST(Controlled, RowSums) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto prior = ts::random_prior(rng, 6, 4, 0.4);
    const ObservationModel obs(6, ts::random_sensors(rng, 6, 2));
    const auto rho =
        ts::observe(ts::dense_propagate(ts::perturbed_prior(rng, prior, 3.0), ts::random_positive(rng, 6)), obs);
    SolverConfig c;
    c.residual_tol = 1e-11;
    const Vector mu_hat = ts::random_positive(rng, 6);
    const auto inner = inner_solve(prior, obs, rho, mu_hat, c);
    const auto calA = controlled_prior(inner.state, prior);
    const auto mu = inner.state.marginals();
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(sum(calA[0].row_values(i)), mu[0][i] / mu_hat[i], 1e-8);
    for (std::size_t t = 1; t < 4; ++t)
      for (std::size_t i = 0; i < 6; ++i)
        if (mu[t][i] > 0.0) {
          EXPECT_NEAR(sum(calA[t].row_values(i)), 1.0, 1e-8);
        }
  }
}

TEST(Controlled, KernelEquivalence) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + trial % 6;
    const std::size_t horizon = 1 + trial % 5;
    const auto prior = ts::random_prior(rng, n, horizon, 0.25);
    const ObservationModel obs(n, ts::random_sensors(rng, n, 1 + trial % 2));
    const auto rho =
        ts::observe(ts::dense_propagate(ts::perturbed_prior(rng, prior, 3.0), ts::random_positive(rng, n)), obs);
    SolverConfig c;
    c.residual_tol = 1e-10;
    const auto inner = inner_solve(prior, obs, rho, ts::random_positive(rng, n), c);
    ASSERT_LE(inner.residual, 1e-10);
    const auto base = kernel_and_rank(observability_matrix(prior, obs)).kernel_basis;
    const auto controlled =
        kernel_and_rank(observability_matrix(as_prior(controlled_prior(inner.state, prior), n), obs)).kernel_basis;
    EXPECT_LE(max_principal_angle(base, controlled), 1e-6) << "trial " << trial;
  }
}

TEST(Shift, ZeroShiftIsIdentity) {
  const auto prior = example1();
  const ObservationModel obs(2, {0});
  const auto res = proximal_solve(prior, obs, series({{2.0}, {1.0}}));
  const auto calA = controlled_prior(res.state, res.reduced_prior);
  const auto shifted = optimal_set_shift(res.plan, calA, Vector{0.0, 0.0}, obs);
  EXPECT_LE(ts::max_abs(shifted.steps[0].to_dense(), res.plan.steps[0].to_dense()), 0.0);
}

TEST(Shift, Example1Family) {
  const auto prior = example1();
  const ObservationModel obs(2, {0});
  const auto rho = series({{2.0}, {1.0}});
  const auto res = proximal_solve(prior, obs, rho);
  const auto calA = controlled_prior(res.state, res.reduced_prior);
  const double eta = res.eta[0];
  for (double c : {0.0, 1.0, 3.5}) {
    const auto shifted = optimal_set_shift(res.plan, calA, Vector{0.0, c}, obs);
    EXPECT_LE(ts::max_abs(shifted.steps[0].to_dense(), ts::Dense{{1.0, 1.0}, {0.0, eta + c}}), 1e-10);
    EXPECT_NEAR(primal_objective(shifted, prior), 0.0, 1e-10);
  }
  try {
    optimal_set_shift(res.plan, calA, Vector{0.0, -eta - 1.0}, obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNegativeMass);
  }
  try {
    optimal_set_shift(res.plan, calA, Vector{1.0, 0.0}, obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotInKernel);
  }
}

TEST(Shift, Example2MovesAlongTheSegment) {
  const auto prior = example2();
  const ObservationModel obs(3, {2});
  const auto rho = series({{0.0}, {1.0}});
  const auto res = proximal_solve(prior, obs, rho);
  const auto calA = controlled_prior(res.state, res.reduced_prior);
  const double base = primal_objective(res.plan, prior);
  // M_0 = diag(mu_hat) calA_0, so the feasible range is [-mu_hat_0, mu_hat_1].
  const auto& mu_hat = res.state.mu_hat;
  for (double theta : {-mu_hat[0], -0.5 * mu_hat[0], 0.25, mu_hat[1]}) {
    const auto shifted = optimal_set_shift(res.plan, calA, Vector{theta, -theta, 0.0}, obs);
    EXPECT_LE(constraint_error(shifted, obs, rho), 1e-8);
    EXPECT_NEAR(primal_objective(shifted, prior), base, 1e-8);
    for (const auto& m : shifted.steps) EXPECT_TRUE(m.support_subset_of(prior.steps[0]));
  }
}

TEST(Canonical, Example1DropsHiddenMass) {
  const auto prior = example1();
  const ObservationModel obs(2, {0});
  const auto rho = series({{2.0}, {1.0}});
  SolverConfig c;
  c.eta_init = Vector{5.0};
  const auto res = proximal_solve(prior, obs, rho, c);
  EXPECT_LE(ts::max_abs(res.plan.steps[0].to_dense(), ts::Dense{{1.0, 1.0}, {0.0, 5.0}}), 1e-10);
  const auto report = analyze_observability(prior, obs);
  const auto plan = canonicalize(res.plan, report, controlled_prior(res.state, res.reduced_prior), obs);
  EXPECT_LE(ts::max_abs(plan.steps[0].to_dense(), ts::Dense{{1.0, 1.0}, {0.0, 0.0}}), 1e-10);
  EXPECT_NEAR(primal_objective(plan, prior), 0.0, 1e-10);
}

TEST(Canonical, UniqueInstanceIsUnchanged) {
  std::mt19937_64 rng(9);
  const auto prior = ts::random_prior(rng, 4, 2, 0.5);
  const ObservationModel obs(4, {0, 1, 2, 3});
  const auto rho = ts::observe(ts::dense_propagate(prior, ts::random_positive(rng, 4)), obs);
  const auto res = proximal_solve(prior, obs, rho);
  const auto report = analyze_observability(prior, obs);
  ASSERT_TRUE(report.is_unique);
  const auto plan = canonicalize(res.plan, report, controlled_prior(res.state, res.reduced_prior), obs);
  for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(plan.steps[t], res.plan.steps[t]);
}

TEST(Canonical, Example2IsNotCanonicalizable) {
  const auto prior = example2();
  const ObservationModel obs(3, {2});
  const auto res = proximal_solve(prior, obs, series({{0.0}, {1.0}}));
  const auto report = analyze_observability(prior, obs);
  try {
    canonicalize(res.plan, report, controlled_prior(res.state, res.reduced_prior), obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotCanonicalizable);
  }
}
