#include <gtest/gtest.h>

#include "ssr/error.hpp"
#include "ssr/validation.hpp"
#include "support.hpp"

namespace ssr {
namespace {

// Scalar closed loop towards [8, 10] on [0, 10].
struct Loop {
  Subsystem system;
  GridAbstraction grid;
  Dfa dfa;
  LabeledRegions regions;
  Controller controller;

  explicit Loop(Subsystem s, const char* formula = "F goal", Box goal = Box(Vector1(8), Vector1(10)), int cells = 20)
      : system(std::move(s)),
        grid(GridAbstraction::build(system, {.cells = {cells},
                                            .inputs = {5},
                                            .internal = std::vector<int>(system.internal_inputs.size(), 3)})),
        dfa(to_dfa(ScltlFormula::parse(formula), {"goal"})),
        regions({{"goal", Role::Goal, {goal}}}) {
    grid.fill_transitions(system);
    SsrCertificate cert;
    cert.id = "loop";
    cert.delta = DeltaProfile::uniform(0.01);
    const auto problem = grid_problem(grid, system, dfa, regions, cert);
    controller = extract_controller(robust_value_iteration(problem, {.horizon = 20}), grid, system, dfa, regions, cert);
  }

  Agent agent() const { return {&system, &controller, &regions, system.theta_nominal}; }
};

Network single() { return Network({"scalar"}, {}); }

}  // namespace

TEST(Episode, NoiselessControllerAlwaysSucceeds) {
  const Loop loop(test::scalar_system("x[0] + u[0]", Box(Vector1(0), Vector1(10)), 1e-18));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto e = simulate_episode(single(), {loop.agent()}, {Vector1(0.3)}, 20, seed);
    EXPECT_TRUE(e.satisfied);
    EXPECT_FALSE(e.escaped);
    EXPECT_EQ(e.steps, 8);
  }
}

TEST(Episode, ZeroHorizon) {
  const Loop loop(test::scalar_system("x[0] + u[0]", Box(Vector1(0), Vector1(10)), 1e-18));
  EXPECT_FALSE(simulate_episode(single(), {loop.agent()}, {Vector1(0.3)}, 0, 1).satisfied);
  EXPECT_TRUE(simulate_episode(single(), {loop.agent()}, {Vector1(9.0)}, 0, 1).satisfied);
}

TEST(Episode, EscapeIsUnsatisfied) {
  // The only inputs push left, out of the grid.
  Subsystem s = test::scalar_system("x[0] - 2 + 0*u[0]", Box(Vector1(0), Vector1(10)), 1e-18);
  const Loop loop(std::move(s));
  const auto e = simulate_episode(single(), {loop.agent()}, {Vector1(3.0)}, 20, 3);
  EXPECT_FALSE(e.satisfied);
  EXPECT_TRUE(e.escaped);
  EXPECT_THROW(simulate_episode(single(), {loop.agent()}, {Vector1(3.0)}, -1, 3), ContractViolation);
}

TEST(Episode, InternalInputsAreTheSendersOutputs) {
  const Loop lead(test::scalar_system("x[0] + u[0]", Box(Vector1(0), Vector1(10)), 0.04));
  Subsystem f = test::scalar_system("x[0] + 0.5*u[0] + 0.1*u[1]", Box(Vector1(0), Vector1(10)), 0.04);
  f.id = "follower";
  f.internal_inputs = {{"scalar", 0}};
  f.internal_box = Box(Vector1(0), Vector1(10));
  Loop follow(f);
  const Network n({"scalar", "follower"}, {{0, 1, 0, 0}});
  Agent a = follow.agent();
  const auto e = simulate_episode(n, {lead.agent(), a}, {Vector1(1.0), Vector1(0.5)}, 15, 7, true);
  ASSERT_GT(e.steps, 0);
  ASSERT_EQ(e.internal[1].size(), static_cast<std::size_t>(e.steps));
  for (int t = 0; t < e.steps; ++t) {
    EXPECT_EQ(e.internal[1][static_cast<std::size_t>(t)][0], e.states[0][static_cast<std::size_t>(t)][0]);
  }
  EXPECT_EQ(e.internal[0][0].size(), 0);
}

TEST(MonteCarlo, FairCoin) {
  Subsystem s = test::scalar_system("0*x[0] + 0*u[0]", Box(Vector1(-10), Vector1(10)), 1.0);
  s.noise.weights = {0.5, 0.5};
  s.noise.means = {{Expression::constant(-1)}, {Expression::constant(1)}};
  s.noise.covariances = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)};
  const Loop loop(s, "F goal", Box(Vector1(0), Vector1(10)), 40);
  const auto run = monte_carlo_estimate(single(), {loop.agent()}, {Vector1(-5)}, {.episodes = 20000, .horizon = 1, .seed = 3});
  EXPECT_NEAR(run.rate, 0.5, 3.0 * std::sqrt(0.25 / 20000));
  EXPECT_LE(run.interval.lower, run.rate);
  EXPECT_GE(run.interval.upper, run.rate);
}

TEST(MonteCarlo, DeterministicAndThreadIndependent) {
  const Loop loop(test::scalar_system("x[0] + u[0]", Box(Vector1(0), Vector1(10)), 0.5));
  const MonteCarloConfig config{.episodes = 500, .horizon = 12, .seed = 99};
  const auto a = monte_carlo_estimate(single(), {loop.agent()}, {Vector1(2.0)}, config);
  const auto b = monte_carlo_estimate(single(), {loop.agent()}, {Vector1(2.0)}, config);
  auto threaded = config;
  threaded.threads = 3;
  const auto c = monte_carlo_estimate(single(), {loop.agent()}, {Vector1(2.0)}, threaded);
  EXPECT_EQ(a.verdicts, b.verdicts);
  EXPECT_EQ(a.verdicts, c.verdicts);
  auto other = config;
  other.seed = 100;
  EXPECT_NE(monte_carlo_estimate(single(), {loop.agent()}, {Vector1(2.0)}, other).verdicts, a.verdicts);
  EXPECT_THROW(monte_carlo_estimate(single(), {loop.agent()}, {Vector1(2.0)}, {.episodes = 10}), ContractViolation);
}

TEST(MonteCarlo, ScalarLoopDominatesItsBound) {
  Subsystem s = test::scalar_system("x[0] + u[0]", Box(Vector1(0), Vector1(10)), 0.25);
  const Loop loop(s);
  SsrCertificate cert;
  cert.id = "loop";
  cert.delta = DeltaProfile::uniform(0.01);
  const auto problem = grid_problem(loop.grid, loop.system, loop.dfa, loop.regions, cert);
  const auto table = robust_value_iteration(problem, {.horizon = 20});
  const std::size_t cell = *loop.grid.locate(Vector1(2.25));
  const double bound = table.bound(problem, cell);
  const auto run = monte_carlo_estimate(single(), {loop.agent()}, {loop.grid.representative(cell)},
                                        {.episodes = 4000, .horizon = 20, .seed = 5});
  EXPECT_GT(bound, 0.5);
  EXPECT_TRUE(check_bound(run, bound).pass) << check_bound(run, bound).message;
}

TEST(Wilson, KnownValues) {
  const auto w = wilson_interval(50, 100);
  EXPECT_NEAR(w.lower, 0.4038, 5e-5);
  EXPECT_NEAR(w.upper, 0.5962, 5e-5);
  EXPECT_NEAR(wilson_interval(0, 100).lower, 0.0, 1e-15);
  EXPECT_EQ(wilson_interval(100, 100).upper, 1.0);
  EXPECT_NEAR(wilson_interval(100, 100).lower, 0.963, 1e-3);
}

TEST(CheckBound, Examples) {
  SimulationRun high;
  high.rate = 0.95;
  high.interval = wilson_interval(9500, 10000);
  EXPECT_TRUE(check_bound(high, 0.7).pass);
  EXPECT_GT(check_bound(high, 0.7).margin, 0.2);
  SimulationRun low;
  low.rate = 0.65;
  low.interval = {0.64, 0.66};
  EXPECT_FALSE(check_bound(low, 0.7).pass);
  EXPECT_TRUE(check_bound(low, 0.0).pass);
  EXPECT_TRUE(check_bound(low, 0.65, 0.01).pass);
}

TEST(Parameters, VerticesFirst) {
  const Box box(Vector2(0, 1), Vector2(1, 2));
  const auto t = parameter_samples(box, 4, 1);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[0], box.upper);
  EXPECT_EQ(t[1], box.lower);
  for (const auto& v : t) EXPECT_TRUE(box.contains(v));
  EXPECT_EQ(parameter_samples(box, 4, 1), t);
}

}  // namespace ssr
