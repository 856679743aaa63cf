#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssr/certificate.hpp"
#include "ssr/grid.hpp"
#include "ssr/logic.hpp"
#include "ssr/transition.hpp"

namespace ssr {

/// Product of a finite model with a DFA, ready for robust dynamic
/// programming. Labels are the robust letters of each abstract state's
/// output; the DFA reads the label of the state it moves into.
struct SynthesisProblem {
  const TransitionModel* model = nullptr;
  const Dfa* dfa = nullptr;
  std::vector<Letter> labels;
  /// Per-step deficit over (state, input * disturbances + disturbance).
  DeltaProfile delta;
  /// Optional safe set: states flagged 0 are worth nothing in every memory
  /// state and accepting memory no longer ends the game early (the value
  /// is then the probability of acceptance while staying safe up to the
  /// horizon). Empty means everything is safe.
  std::vector<char> safe;

  void validate() const;
  bool has_safety() const noexcept { return !safe.empty(); }
};

struct SynthesisOptions {
  /// Fixed number of backups; 0 means iterate until the residual drops
  /// below `tolerance` (at most `max_iterations` backups).
  int horizon = 0;
  double tolerance = 1e-9;
  int max_iterations = 100000;
  int threads = 1;
};

/// Values after the last backup and the greedy policies. A fixed horizon
/// keeps one policy per backup; a converged run keeps only the last one.
class ValueTable {
 public:
  std::size_t states() const noexcept { return states_; }
  std::size_t memory() const noexcept { return memory_; }
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }
  bool time_varying() const noexcept { return time_varying_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  double value(std::size_t state, std::size_t q) const { return values_[q * states_ + state]; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Input index chosen with `steps_to_go` steps remaining (clamped to the
  /// available backups; a converged table has one stationary policy).
  std::uint32_t action(std::size_t state, std::size_t q, int steps_to_go) const;
  const std::vector<std::vector<std::uint32_t>>& policies() const noexcept { return policies_; }

  /// Lower bound from an initial abstract state: the DFA first reads the
  /// label of that state.
  double bound(const SynthesisProblem& p, std::size_t initial_state) const;

  /// Reassembles a table from stored parts (used by deserialization).
  static ValueTable from_parts(std::size_t states, std::size_t memory, std::vector<double> values,
                               std::vector<std::vector<std::uint32_t>> policies, bool time_varying,
                               int iterations, double residual);

 private:
  std::size_t states_ = 0;
  std::size_t memory_ = 0;
  std::vector<double> values_;
  // policies_[n - 1][q * states + s] for n steps to go.
  std::vector<std::vector<std::uint32_t>> policies_;
  bool time_varying_ = false;
  int iterations_ = 0;
  double residual_ = 0.0;
  std::vector<std::string> warnings_;

  friend ValueTable robust_value_iteration(const SynthesisProblem&, const SynthesisOptions&);
};

/// V_0 = [q accepting]; V_{n+1}(s, q) = 1 for accepting q, else
/// max_a min_v max{0, sum_s' P(s'|s,a,v) V_n(s', tau(q, L(s'))) - delta(s, a, v)}.
/// Ties between inputs go to the lowest index; accepting memory uses input 0.
ValueTable robust_value_iteration(const SynthesisProblem& problem, const SynthesisOptions& options = {});

/// Product problem for a grid abstraction: labels from the output of every
/// cell representative under the certificate's epsilon, deltas from the
/// certificate (constant or indexed by the grid's signature), and an
/// optional safe box in output space (a cell is safe when the output image
/// of the whole cell lies inside it).
SynthesisProblem grid_problem(const GridAbstraction& g, const Subsystem& s, const Dfa& dfa,
                              const LabeledRegions& regions, const SsrCertificate& certificate,
                              const std::optional<Box>& safe_box = std::nullopt);

/// Finite-memory controller refined to the concrete system through the
/// identity interface u = u_hat.
class Controller {
 public:
  Controller() = default;
  /// `labels` holds the robust letter of every grid cell.
  Controller(const GridAbstraction& g, std::vector<Letter> labels, Dfa dfa, ValueTable table);

  struct Action {
    Vector u;
    std::size_t cell = 0;
    bool failed = false;
  };

  /// Memory after reading the first output, or nullopt when x0 is off the
  /// grid.
  std::optional<std::size_t> start(const Vector& x0) const;
  /// Input at time t (steps to go = horizon - t).
  Action act(const Vector& x, std::size_t q, int t) const;
  /// Memory update from the next concrete state; nullopt when it left the
  /// grid.
  std::optional<std::size_t> update(std::size_t q, const Vector& x_next) const;
  bool satisfied(std::size_t q) const { return dfa_.accepting(q); }

  const Dfa& dfa() const noexcept { return dfa_; }
  const ValueTable& table() const noexcept { return table_; }
  int horizon() const noexcept { return table_.iterations(); }

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::vector<Vector> inputs_;
  std::vector<Letter> labels_;
  Dfa dfa_;
  ValueTable table_;

  std::optional<std::size_t> cell_of(const Vector& x) const;
};

/// Extracts the controller from a value table.
Controller extract_controller(const ValueTable& v, const GridAbstraction& g, const Subsystem& s, const Dfa& dfa,
                              const LabeledRegions& regions, const SsrCertificate& certificate);

/// One closed-loop decision: input for x at time t with memory q.
inline Controller::Action run_controller_step(const Controller& c, const Vector& x, std::size_t q, int t) {
  return c.act(x, q, t);
}

}  // namespace ssr
