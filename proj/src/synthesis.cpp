#include "ssr/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssr/error.hpp"
#include "ssr/parallel.hpp"

namespace ssr {

void SynthesisProblem::validate() const {
  require(model != nullptr && dfa != nullptr, "synthesis problem needs a model and an automaton");
  const std::size_t n = model->states();
  require(labels.size() == n, "synthesis problem needs one label per state");
  for (Letter a : labels) require(a < dfa->letters(), "label outside the automaton's alphabet");
  require(safe.empty() || safe.size() == n, "safe set must flag every state");
  if (!delta.is_constant()) {
    require(delta.rows == n && delta.cols == model->inputs() * model->disturbances(),
            "delta table shape does not match the transition model");
  }
  require(delta.max() <= 1.0, "delta above 1");
}

std::uint32_t ValueTable::action(std::size_t state, std::size_t q, int steps_to_go) const {
  require(!policies_.empty(), "value table has no policy");
  std::size_t n = 0;
  if (time_varying_) {
    n = static_cast<std::size_t>(std::clamp(steps_to_go, 1, static_cast<int>(policies_.size())) - 1);
  }
  return policies_[n][q * states_ + state];
}

double ValueTable::bound(const SynthesisProblem& p, std::size_t initial_state) const {
  require(initial_state < states_, "initial state out of range");
  if (p.has_safety() && !p.safe[initial_state]) return 0.0;
  const std::size_t q = p.dfa->next(p.dfa->initial(), p.labels[initial_state]);
  return value(initial_state, q);
}

ValueTable ValueTable::from_parts(std::size_t states, std::size_t memory, std::vector<double> values,
                                  std::vector<std::vector<std::uint32_t>> policies, bool time_varying,
                                  int iterations, double residual) {
  require(values.size() == states * memory, "value table has the wrong size");
  for (const auto& p : policies) require(p.size() == states * memory, "policy table has the wrong size");
  ValueTable t;
  t.states_ = states;
  t.memory_ = memory;
  t.values_ = std::move(values);
  t.policies_ = std::move(policies);
  t.time_varying_ = time_varying;
  t.iterations_ = iterations;
  t.residual_ = residual;
  return t;
}

namespace {

bool accepting_reachable(const Dfa& d) {
  std::vector<char> seen(d.size());
  std::vector<std::size_t> stack{d.initial()};
  seen[d.initial()] = 1;
  while (!stack.empty()) {
    const std::size_t q = stack.back();
    stack.pop_back();
    if (d.accepting(q)) return true;
    for (Letter a = 0; a < d.letters(); ++a) {
      const std::size_t t = d.next(q, a);
      if (!seen[t]) {
        seen[t] = 1;
        stack.push_back(t);
      }
    }
  }
  return false;
}

}  // namespace

ValueTable robust_value_iteration(const SynthesisProblem& p, const SynthesisOptions& options) {
  p.validate();
  require(options.horizon >= 0, "horizon must be nonnegative");
  require(options.horizon > 0 || options.tolerance > 0.0, "need a horizon or a positive tolerance");
  const TransitionModel& model = *p.model;
  const Dfa& dfa = *p.dfa;
  const std::size_t S = model.states(), A = model.inputs(), D = model.disturbances(), Q = dfa.size();
  const bool safety = p.has_safety();
  auto is_safe = [&](std::size_t s) { return !safety || p.safe[s]; };

  ValueTable t;
  t.states_ = S;
  t.memory_ = Q;
  t.time_varying_ = options.horizon > 0;
  if (!accepting_reachable(dfa)) {
    t.warnings_.push_back("no accepting automaton state is reachable; the value is identically zero");
  }

  // Memory states that need backups. Rejecting memory is worth 0 forever;
  // without a safe set, accepting memory is worth 1 forever.
  std::vector<std::size_t> active;
  for (std::size_t q = 0; q < Q; ++q) {
    if (dfa.rejecting(q)) continue;
    if (dfa.accepting(q) && !safety) continue;
    active.push_back(q);
  }
  const std::size_t m = active.size();

  std::vector<double> values(Q * S, 0.0);
  for (std::size_t q = 0; q < Q; ++q) {
    if (!dfa.accepting(q)) continue;
    for (std::size_t s = 0; s < S; ++s) values[q * S + s] = is_safe(s) ? 1.0 : 0.0;
  }

  // Memory successor after moving into s': next_memory[q * S + s'].
  std::vector<std::size_t> next_memory(Q * S);
  for (std::size_t q = 0; q < Q; ++q) {
    for (std::size_t s = 0; s < S; ++s) next_memory[q * S + s] = dfa.next(q, p.labels[s]);
  }

  std::vector<double> continuation(m * S);
  std::vector<const double*> pointers(m);
  for (std::size_t j = 0; j < m; ++j) pointers[j] = continuation.data() + j * S;

  const int limit = t.time_varying_ ? options.horizon : options.max_iterations;
  for (int n = 1; n <= limit; ++n) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t q = active[j];
      for (std::size_t s = 0; s < S; ++s) continuation[j * S + s] = values[next_memory[q * S + s] * S + s];
    }
    std::vector<double> updated = values;
    std::vector<std::uint32_t> policy(Q * S, 0);

    parallel_for(S, options.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> expected(A * D * m);
      for (std::size_t s = begin; s < end; ++s) {
        if (!is_safe(s)) {
          for (std::size_t q : active) updated[q * S + s] = 0.0;
          continue;
        }
        for (std::size_t a = 0; a < A; ++a) {
          for (std::size_t v = 0; v < D; ++v) model.expectations(s, a, v, pointers, expected.data() + (a * D + v) * m);
        }
        for (std::size_t j = 0; j < m; ++j) {
          double best = -1.0;
          std::uint32_t argmax = 0;
          for (std::size_t a = 0; a < A; ++a) {
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t v = 0; v < D; ++v) {
              const double backed = expected[(a * D + v) * m + j] - p.delta.at(s, a * D + v);
              worst = std::min(worst, std::max(0.0, backed));
            }
            if (worst > best) {
              best = worst;
              argmax = static_cast<std::uint32_t>(a);
            }
          }
          updated[active[j] * S + s] = std::min(1.0, best);
          policy[active[j] * S + s] = argmax;
        }
      }
    });

    double residual = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) residual = std::max(residual, std::abs(updated[i] - values[i]));
    values.swap(updated);
    t.residual_ = residual;
    t.iterations_ = n;
    if (t.time_varying_) {
      t.policies_.push_back(std::move(policy));
    } else {
      t.policies_.assign(1, std::move(policy));
      if (residual < options.tolerance) break;
    }
  }
  if (!t.time_varying_ && t.residual_ >= options.tolerance) {
    t.warnings_.push_back("value iteration stopped at the iteration limit with residual " + std::to_string(t.residual_));
  }
  if (t.policies_.empty()) t.policies_.assign(1, std::vector<std::uint32_t>(Q * S, 0));
  t.values_ = std::move(values);
  return t;
}

namespace {

std::vector<Letter> cell_labels(const GridAbstraction& g, const Subsystem& s, const LabeledRegions& regions,
                                double epsilon) {
  std::vector<Letter> labels(g.cells());
  // Concrete outputs stay in the image of the state box while on the grid.
  const Box domain = s.output.image(s.state_box);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    labels[c] = regions.robust(s.output(g.representative(c)), epsilon, domain);
  }
  return labels;
}

}  // namespace

SynthesisProblem grid_problem(const GridAbstraction& g, const Subsystem& s, const Dfa& dfa,
                              const LabeledRegions& regions, const SsrCertificate& certificate,
                              const std::optional<Box>& safe_box) {
  require(g.has_transitions(), "grid abstraction has no transitions yet");
  require(regions.names() == dfa.propositions(), "automaton alphabet does not match the labeled regions");
  certificate.validate();
  if (!certificate.delta.is_constant()) {
    require(certificate.delta.index == g.signature(),
            "certificate delta is indexed by '" + certificate.delta.index + "', not by grid '" + g.signature() + "'");
  }
  SynthesisProblem p;
  p.model = &g;
  p.dfa = &dfa;
  p.labels = cell_labels(g, s, regions, certificate.epsilon);
  p.delta = certificate.delta;
  if (safe_box) {
    require(safe_box->dimension() == s.output_box.dimension(), "safe box dimension does not match the output space");
    p.safe.resize(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) p.safe[c] = safe_box->contains(s.output.image(g.cell_box(c)), 1e-12);
  }
  p.validate();
  return p;
}

Controller::Controller(const GridAbstraction& g, std::vector<Letter> labels, Dfa dfa, ValueTable table)
    : axes_(g.axes()), inputs_(g.input_lattice().points), labels_(std::move(labels)), dfa_(std::move(dfa)),
      table_(std::move(table)) {
  require(labels_.size() == g.cells(), "controller needs one label per cell");
  require(table_.states() == g.cells() && table_.memory() == dfa_.size(), "value table does not match the product");
  strides_.assign(axes_.size(), 1);
  for (std::size_t d = axes_.size(); d-- > 1;) strides_[d - 1] = strides_[d] * static_cast<std::size_t>(axes_[d].count);
}

std::optional<std::size_t> Controller::cell_of(const Vector& x) const {
  require(static_cast<std::size_t>(x.size()) == axes_.size(), "state dimension does not match the grid");
  std::size_t cell = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    const int i = axes_[d].locate(x[static_cast<Eigen::Index>(d)]);
    if (i < 0) return std::nullopt;
    cell += strides_[d] * static_cast<std::size_t>(i);
  }
  return cell;
}

std::optional<std::size_t> Controller::start(const Vector& x0) const {
  const auto cell = cell_of(x0);
  if (!cell) return std::nullopt;
  return dfa_.next(dfa_.initial(), labels_[*cell]);
}

Controller::Action Controller::act(const Vector& x, std::size_t q, int t) const {
  Action out;
  const auto cell = cell_of(x);
  if (!cell) {
    out.failed = true;
    out.u = inputs_.front();
    return out;
  }
  out.cell = *cell;
  out.u = inputs_[table_.action(*cell, q, table_.iterations() - t)];
  return out;
}

std::optional<std::size_t> Controller::update(std::size_t q, const Vector& x_next) const {
  const auto cell = cell_of(x_next);
  if (!cell) return std::nullopt;
  return dfa_.next(q, labels_[*cell]);
}

Controller extract_controller(const ValueTable& v, const GridAbstraction& g, const Subsystem& s, const Dfa& dfa,
                              const LabeledRegions& regions, const SsrCertificate& certificate) {
  return Controller(g, cell_labels(g, s, regions, certificate.epsilon), dfa, v);
}

}  // namespace ssr
