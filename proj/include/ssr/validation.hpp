#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssr/logic.hpp"
#include "ssr/network.hpp"
#include "ssr/synthesis.hpp"

namespace ssr {

/// One closed-loop subsystem in a simulation: the true system at a fixed
/// parameter, its refined controller, and the regions judging its trace.
struct Agent {
  const Subsystem* system = nullptr;
  const Controller* controller = nullptr;
  const LabeledRegions* regions = nullptr;
  Vector theta;
};

struct Episode {
  bool satisfied = false;
  /// Some state left its grid before every specification was met.
  bool escaped = false;
  int steps = 0;
  /// Per node: visited states, and the internal inputs applied at each step
  /// (filled only when a trace is requested).
  std::vector<std::vector<Vector>> states;
  std::vector<std::vector<Vector>> internal;
};

/// Steps the true interconnected dynamics for up to `horizon` steps.
/// Internal inputs are the senders' current outputs; verdicts use exact
/// labels and hold once every automaton accepts.
Episode simulate_episode(const Network& n, const std::vector<Agent>& agents, const std::vector<Vector>& x0,
                         int horizon, std::uint64_t seed, bool record_trace = false);

struct WilsonInterval {
  double lower = 0.0;
  double upper = 1.0;
};

/// 95% Wilson score interval for a binomial proportion.
WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct MonteCarloConfig {
  std::size_t episodes = 10000;
  int horizon = 30;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct SimulationRun {
  std::vector<Vector> thetas;
  std::vector<Vector> x0;
  std::uint64_t seed = 0;
  int horizon = 0;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::vector<char> verdicts;
  double rate = 0.0;
  WilsonInterval interval;
};

/// Independent episodes with seeds derived from (seed, episode index), so
/// the verdict sequence does not depend on the thread count.
SimulationRun monte_carlo_estimate(const Network& n, const std::vector<Agent>& agents, const std::vector<Vector>& x0,
                                   const MonteCarloConfig& config);

struct BoundCheck {
  bool pass = false;
  double bound = 0.0;
  double lower_confidence = 0.0;
  /// lower_confidence - bound (negative on failure).
  double margin = 0.0;
  std::string message;
};

/// Passes iff the lower confidence limit is at least bound - tolerance.
BoundCheck check_bound(const SimulationRun& run, double bound, double tolerance = 0.0);

/// Parameters to validate with: the upper and lower vertices of the box,
/// then uniform draws.
std::vector<Vector> parameter_samples(const Box& box, std::size_t count, std::uint64_t seed);

/// Mixes a base seed with stream indices (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace ssr
