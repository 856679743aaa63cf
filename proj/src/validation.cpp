#include "ssr/validation.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "ssr/error.hpp"
#include "ssr/parallel.hpp"

namespace ssr {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ull));
}

Episode simulate_episode(const Network& n, const std::vector<Agent>& agents, const std::vector<Vector>& x0,
                         int horizon, std::uint64_t seed, bool record_trace) {
  const std::size_t N = agents.size();
  require(N == n.size() && x0.size() == N, "one agent and one initial state per network node");
  require(horizon >= 0, "horizon must be nonnegative");
  std::vector<GaussianMixture> noise;
  std::vector<std::vector<Vector>> draws(N);
  for (std::size_t i = 0; i < N; ++i) {
    const Agent& a = agents[i];
    require(a.system && a.controller && a.regions, "agent is missing its system, controller or regions");
    require(a.system->theta_box.contains(a.theta, 1e-12), "agent parameter lies outside the parameter box");
    noise.push_back(a.system->noise.at(a.theta));
    draws[i] = noise.back().sample(derive_seed(seed, i), static_cast<std::size_t>(horizon));
  }

  Episode e;
  if (record_trace) {
    e.states.resize(N);
    e.internal.resize(N);
  }
  std::vector<Vector> x = x0;
  std::vector<std::size_t> verdict(N), memory(N);
  bool escaped = false;
  auto all_accepted = [&] {
    for (std::size_t i = 0; i < N; ++i) {
      if (!agents[i].controller->dfa().accepting(verdict[i])) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < N; ++i) {
    const Dfa& d = agents[i].controller->dfa();
    verdict[i] = d.next(d.initial(), agents[i].regions->exact(agents[i].system->output(x[i])));
    const auto q = agents[i].controller->start(x[i]);
    if (!q) escaped = true;
    memory[i] = q.value_or(0);
    if (record_trace) e.states[i].push_back(x[i]);
  }

  int t = 0;
  while (!all_accepted() && !escaped && t < horizon) {
    std::vector<Vector> y(N);
    for (std::size_t i = 0; i < N; ++i) y[i] = agents[i].system->output(x[i]);
    std::vector<Vector> next(N);
    for (std::size_t i = 0; i < N; ++i) {
      const Subsystem& s = *agents[i].system;
      const auto action = agents[i].controller->act(x[i], memory[i], t);
      if (action.failed) {
        escaped = true;
        break;
      }
      Vector u(s.input_dim());
      u.head(s.external_inputs) = action.u;
      Vector v(static_cast<Eigen::Index>(s.internal_inputs.size()));
      for (const auto& edge : n.edges()) {
        if (edge.to != i) continue;
        v[static_cast<Eigen::Index>(edge.slot)] = y[edge.from][edge.output];
      }
      u.tail(v.size()) = v;
      if (record_trace) e.internal[i].push_back(v);
      next[i] = eval_dynamics(s, x[i], u, agents[i].theta) + draws[i][static_cast<std::size_t>(t)];
    }
    if (escaped) break;
    ++t;
    for (std::size_t i = 0; i < N; ++i) {
      x[i] = next[i];
      if (record_trace) e.states[i].push_back(x[i]);
      const Dfa& d = agents[i].controller->dfa();
      verdict[i] = d.next(verdict[i], agents[i].regions->exact(agents[i].system->output(x[i])));
      const auto q = agents[i].controller->update(memory[i], x[i]);
      if (q) {
        memory[i] = *q;
      } else {
        escaped = true;
      }
    }
  }
  // An accepted good prefix stays accepted even if the state leaves the
  // grid on the same step.
  e.steps = t;
  e.satisfied = all_accepted();
  e.escaped = escaped && !e.satisfied;
  return e;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  require(successes <= trials, "more successes than trials");
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

SimulationRun monte_carlo_estimate(const Network& n, const std::vector<Agent>& agents, const std::vector<Vector>& x0,
                                   const MonteCarloConfig& config) {
  require(config.episodes >= 100, "Monte Carlo estimates need at least 100 episodes");
  SimulationRun run;
  for (const auto& a : agents) run.thetas.push_back(a.theta);
  run.x0 = x0;
  run.seed = config.seed;
  run.horizon = config.horizon;
  run.episodes = config.episodes;
  run.verdicts.assign(config.episodes, 0);
  parallel_for(config.episodes, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      run.verdicts[k] = simulate_episode(n, agents, x0, config.horizon, derive_seed(config.seed, k, 1)).satisfied;
    }
  });
  for (char v : run.verdicts) run.successes += static_cast<std::size_t>(v);
  run.rate = static_cast<double>(run.successes) / static_cast<double>(run.episodes);
  run.interval = wilson_interval(run.successes, run.episodes);
  return run;
}

BoundCheck check_bound(const SimulationRun& run, double bound, double tolerance) {
  BoundCheck c;
  c.bound = bound;
  c.lower_confidence = run.interval.lower;
  c.margin = c.lower_confidence - bound;
  c.pass = c.lower_confidence >= bound - tolerance;
  std::ostringstream os;
  os.precision(6);
  os << (c.pass ? "pass" : "FAIL") << ": empirical " << run.rate << " (95% lower " << c.lower_confidence
     << ") vs bound " << bound << ", margin " << c.margin;
  if (!c.pass) os << "; the bound exceeds the observed rate, which points at a soundness problem";
  c.message = os.str();
  return c;
}

std::vector<Vector> parameter_samples(const Box& box, std::size_t count, std::uint64_t seed) {
  std::vector<Vector> out;
  if (count > 0) out.push_back(box.upper);
  if (count > 1) out.push_back(box.lower);
  std::mt19937_64 rng(derive_seed(seed, 0x7468657461ull));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (out.size() < count) {
    Vector t = box.lower;
    for (Eigen::Index d = 0; d < t.size(); ++d) t[d] += unit(rng) * (box.upper[d] - box.lower[d]);
    out.push_back(t);
  }
  return out;
}

}  // namespace ssr
