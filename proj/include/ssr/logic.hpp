#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssr/subsystem.hpp"

namespace ssr {

/// Set of asserted propositions, bit i for proposition i.
using Letter = std::uint32_t;

/// Syntactically co-safe LTL formula: propositions, negated propositions,
/// and, or, next, until, eventually, true, false.
class ScltlFormula {
 public:
  enum class Kind { True, False, Prop, NotProp, And, Or, Next, Until, Eventually };

  struct Node {
    Kind kind;
    std::string name;  // Prop / NotProp
    int lhs = -1;
    int rhs = -1;
  };

  /// ASCII syntax: F, X, U, &, |, !, true, false; unicode ◇ ○ ∧ ∨ ¬ are
  /// accepted as aliases. Unary operators bind tightest, then &, then |,
  /// then U (right associative). G and negation of anything but a
  /// proposition are rejected with a ParseError.
  static ScltlFormula parse(std::string_view text);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int root() const noexcept { return root_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  /// Sorted distinct proposition names.
  std::vector<std::string> propositions() const;
  /// Fully parenthesized ASCII rendering.
  std::string to_string() const;

  enum Polarity : unsigned { None = 0, Positive = 1, Negative = 2, Both = 3 };
  Polarity polarity(const std::string& proposition) const;

 private:
  std::vector<Node> nodes_;
  int root_ = -1;
  friend class FormulaParser;
};

/// Deterministic automaton over letters 0 .. 2^|AP| - 1 accepting exactly
/// the good prefixes of a formula. Accepting states are absorbing.
class Dfa {
 public:
  std::size_t size() const noexcept { return accepting_.size(); }
  std::size_t initial() const noexcept { return initial_; }
  std::size_t letters() const noexcept { return letters_; }
  const std::vector<std::string>& propositions() const noexcept { return propositions_; }
  bool accepting(std::size_t q) const { return accepting_.at(q) != 0; }
  /// Non-accepting and unable to reach acceptance.
  bool rejecting(std::size_t q) const { return rejecting_.at(q) != 0; }
  std::size_t next(std::size_t q, Letter a) const { return transitions_[q * letters_ + a]; }
  std::size_t run(const std::vector<Letter>& word) const;
  bool accepts(const std::vector<Letter>& word) const { return accepting(run(word)); }

  /// Builds the automaton from explicit tables (used by serialization).
  static Dfa from_tables(std::vector<std::string> propositions, std::size_t initial,
                         std::vector<std::size_t> transitions, std::vector<char> accepting);
  const std::vector<std::size_t>& transition_table() const noexcept { return transitions_; }

 private:
  std::vector<std::string> propositions_;
  std::size_t letters_ = 1;
  std::size_t initial_ = 0;
  std::vector<std::size_t> transitions_;
  std::vector<char> accepting_;
  std::vector<char> rejecting_;

  void classify();
  friend Dfa to_dfa(const ScltlFormula&, const std::vector<std::string>&, std::size_t);
};

/// Minimal good-prefix automaton by formula progression. `propositions`
/// fixes the bit order and must include every proposition of the formula.
/// Throws ContractViolation when more than `max_states` progressed formulas
/// appear.
Dfa to_dfa(const ScltlFormula& formula, const std::vector<std::string>& propositions,
           std::size_t max_states = 100000);

enum class Role { Goal, Obstacle, Neutral };

const char* to_string(Role role) noexcept;
Role role_from_string(const std::string& text);

struct Proposition {
  std::string name;
  Role role = Role::Neutral;
  std::vector<Box> regions;
};

/// Propositions bound to unions of boxes in the output space.
class LabeledRegions {
 public:
  LabeledRegions() = default;
  explicit LabeledRegions(std::vector<Proposition> propositions);

  const std::vector<Proposition>& propositions() const noexcept { return propositions_; }
  std::vector<std::string> names() const;
  std::size_t index(const std::string& name) const;

  /// Propositions whose region contains y.
  Letter exact(const Vector& y) const;

  /// Labels valid for every output within distance epsilon of y_hat. A
  /// proposition is certainly true when the closed ball fits inside one of
  /// its boxes and certainly false when the ball misses all of them. In
  /// between, goals are dropped and obstacles asserted; an undecided
  /// neutral proposition throws ContractViolation. When `domain` is given
  /// (the set of outputs that can occur at all), the ball is clipped to it.
  Letter robust(const Vector& y_hat, double epsilon, const std::optional<Box>& domain = std::nullopt) const;

 private:
  std::vector<Proposition> propositions_;
};

}  // namespace ssr
