#include "ssr/logic.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>

#include "ssr/error.hpp"

namespace ssr {

// ---------------------------------------------------------------- parsing

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) {}

  ScltlFormula run() {
    ScltlFormula f;
    out_ = &f;
    f.root_ = parse_until();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  using Kind = ScltlFormula::Kind;
  std::string_view text_;
  std::size_t pos_ = 0;
  ScltlFormula* out_ = nullptr;

  [[noreturn]] void fail(const std::string& what, std::size_t at) const { throw ParseError(what, at); }
  [[noreturn]] void fail(const std::string& what) const { fail(what, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept_symbol(std::initializer_list<std::string_view> spellings) {
    skip_space();
    for (auto s : spellings) {
      if (text_.substr(pos_, s.size()) == s) {
        pos_ += s.size();
        return true;
      }
    }
    return false;
  }

  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  // Peeks at an identifier without consuming it.
  std::string_view peek_identifier() {
    skip_space();
    std::size_t end = pos_;
    if (end < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
      while (end < text_.size() && ident_char(text_[end])) ++end;
    }
    return text_.substr(pos_, end - pos_);
  }

  bool accept_keyword(std::string_view word) {
    if (peek_identifier() != word) return false;
    pos_ += word.size();
    return true;
  }

  int add(ScltlFormula::Node n) {
    out_->nodes_.push_back(std::move(n));
    return static_cast<int>(out_->nodes_.size()) - 1;
  }

  int parse_until() {
    const int lhs = parse_or();
    if (accept_keyword("U")) return add({Kind::Until, {}, lhs, parse_until()});
    return lhs;
  }

  int parse_or() {
    int lhs = parse_and();
    while (accept_symbol({"||", "|", "∨"})) lhs = add({Kind::Or, {}, lhs, parse_and()});
    return lhs;
  }

  int parse_and() {
    int lhs = parse_unary();
    while (accept_symbol({"&&", "&", "∧"})) lhs = add({Kind::And, {}, lhs, parse_unary()});
    return lhs;
  }

  int parse_unary() {
    skip_space();
    const std::size_t start = pos_;
    if (accept_symbol({"!", "¬"})) {
      const int operand = parse_unary();
      ScltlFormula::Node& n = out_->nodes_[static_cast<std::size_t>(operand)];
      switch (n.kind) {
        case Kind::Prop: n.kind = Kind::NotProp; return operand;
        case Kind::True: n.kind = Kind::False; return operand;
        case Kind::False: n.kind = Kind::True; return operand;
        default: fail("negation is only allowed on propositions", start);
      }
    }
    if (accept_symbol({"○", "◯"}) || accept_keyword("X")) return add({Kind::Next, {}, parse_unary(), -1});
    if (accept_symbol({"◇", "⋄"}) || accept_keyword("F")) return add({Kind::Eventually, {}, parse_unary(), -1});
    if (peek_identifier() == "G" || accept_symbol({"□"})) fail("'always' is outside the co-safe fragment", start);
    return parse_primary();
  }

  int parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of formula");
    if (text_[pos_] == '(') {
      ++pos_;
      const int inner = parse_until();
      if (!accept_symbol({")"})) fail("expected ')'");
      return inner;
    }
    const std::string_view word = peek_identifier();
    if (word.empty()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    if (word == "U") fail("'U' needs a left operand");
    pos_ += word.size();
    if (word == "true") return add({Kind::True, {}, -1, -1});
    if (word == "false") return add({Kind::False, {}, -1, -1});
    return add({Kind::Prop, std::string(word), -1, -1});
  }
};

ScltlFormula ScltlFormula::parse(std::string_view text) { return FormulaParser(text).run(); }

std::vector<std::string> ScltlFormula::propositions() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.kind == Kind::Prop || n.kind == Kind::NotProp) out.push_back(n.name);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string ScltlFormula::to_string() const {
  auto render = [&](auto&& self, int id) -> std::string {
    const Node& n = node(id);
    switch (n.kind) {
      case Kind::True: return "true";
      case Kind::False: return "false";
      case Kind::Prop: return n.name;
      case Kind::NotProp: return "!" + n.name;
      case Kind::And: return "(" + self(self, n.lhs) + " & " + self(self, n.rhs) + ")";
      case Kind::Or: return "(" + self(self, n.lhs) + " | " + self(self, n.rhs) + ")";
      case Kind::Next: return "X " + self(self, n.lhs);
      case Kind::Until: return "(" + self(self, n.lhs) + " U " + self(self, n.rhs) + ")";
      case Kind::Eventually: return "F " + self(self, n.lhs);
    }
    return {};
  };
  return render(render, root_);
}

ScltlFormula::Polarity ScltlFormula::polarity(const std::string& proposition) const {
  unsigned p = None;
  for (const auto& n : nodes_) {
    if (n.name != proposition) continue;
    if (n.kind == Kind::Prop) p |= Positive;
    if (n.kind == Kind::NotProp) p |= Negative;
  }
  return static_cast<Polarity>(p);
}

// ------------------------------------------------------------ progression

namespace {

enum class P : int { True, False, Prop, NotProp, And, Or, Next, Until, Eventually };

// Hash-consed formulas; equal ids mean syntactically equal normal forms.
class FormulaStore {
 public:
  int intern(P kind, int prop, std::vector<int> kids) {
    std::vector<int> key{static_cast<int>(kind), prop};
    key.insert(key.end(), kids.begin(), kids.end());
    auto [it, inserted] = ids_.emplace(std::move(key), static_cast<int>(nodes_.size()));
    if (inserted) nodes_.push_back({kind, prop, std::move(kids)});
    return it->second;
  }

  int truth(bool value) { return intern(value ? P::True : P::False, -1, {}); }

  int junction(P kind, const std::vector<int>& parts) {
    const P unit = kind == P::And ? P::True : P::False;
    const P zero = kind == P::And ? P::False : P::True;
    std::vector<int> flat;
    for (int id : parts) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.kind == unit) continue;
      if (n.kind == zero) return truth(kind == P::Or);
      if (n.kind == kind) {
        flat.insert(flat.end(), n.kids.begin(), n.kids.end());
      } else {
        flat.push_back(id);
      }
    }
    std::sort(flat.begin(), flat.end());
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    // p together with !p
    for (int id : flat) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.kind != P::Prop) continue;
      const int negated = find(P::NotProp, n.prop);
      if (negated >= 0 && std::binary_search(flat.begin(), flat.end(), negated)) return truth(kind == P::Or);
    }
    if (flat.empty()) return truth(kind == P::And);
    if (flat.size() == 1) return flat.front();
    return intern(kind, -1, std::move(flat));
  }

  int progress(int id, Letter a) {
    const auto key = std::make_pair(id, a);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const Node n = nodes_[static_cast<std::size_t>(id)];
    int result = -1;
    switch (n.kind) {
      case P::True:
      case P::False: result = id; break;
      case P::Prop: result = truth((a >> n.prop) & 1u); break;
      case P::NotProp: result = truth(!((a >> n.prop) & 1u)); break;
      case P::And:
      case P::Or: {
        std::vector<int> parts;
        for (int k : n.kids) parts.push_back(progress(k, a));
        result = junction(n.kind, parts);
        break;
      }
      case P::Next: result = n.kids[0]; break;
      case P::Until: {
        const int hold = progress(n.kids[0], a);
        const int done = progress(n.kids[1], a);
        result = junction(P::Or, {done, junction(P::And, {hold, id})});
        break;
      }
      case P::Eventually: result = junction(P::Or, {progress(n.kids[0], a), id}); break;
    }
    memo_.emplace(key, result);
    return result;
  }

  bool is_true(int id) const { return nodes_[static_cast<std::size_t>(id)].kind == P::True; }

 private:
  struct Node {
    P kind;
    int prop;
    std::vector<int> kids;
  };
  std::vector<Node> nodes_;
  std::map<std::vector<int>, int> ids_;
  std::map<std::pair<int, Letter>, int> memo_;

  int find(P kind, int prop) const {
    auto it = ids_.find({static_cast<int>(kind), prop});
    return it == ids_.end() ? -1 : it->second;
  }
};

int lower(const ScltlFormula& f, int id, FormulaStore& store, const std::vector<std::string>& props) {
  using K = ScltlFormula::Kind;
  const auto& n = f.node(id);
  auto prop_index = [&](const std::string& name) {
    const auto it = std::find(props.begin(), props.end(), name);
    require(it != props.end(), "formula proposition '" + name + "' is not in the alphabet");
    return static_cast<int>(it - props.begin());
  };
  switch (n.kind) {
    case K::True: return store.truth(true);
    case K::False: return store.truth(false);
    case K::Prop: return store.intern(P::Prop, prop_index(n.name), {});
    case K::NotProp: return store.intern(P::NotProp, prop_index(n.name), {});
    case K::And: return store.junction(P::And, {lower(f, n.lhs, store, props), lower(f, n.rhs, store, props)});
    case K::Or: return store.junction(P::Or, {lower(f, n.lhs, store, props), lower(f, n.rhs, store, props)});
    case K::Next: return store.intern(P::Next, -1, {lower(f, n.lhs, store, props)});
    case K::Until: {
      const int a = lower(f, n.lhs, store, props);
      const int b = lower(f, n.rhs, store, props);
      return store.intern(P::Until, -1, {a, b});
    }
    case K::Eventually: return store.intern(P::Eventually, -1, {lower(f, n.lhs, store, props)});
  }
  return -1;
}

}  // namespace

std::size_t Dfa::run(const std::vector<Letter>& word) const {
  std::size_t q = initial_;
  for (Letter a : word) {
    require(a < letters_, "letter outside the alphabet");
    q = next(q, a);
  }
  return q;
}

void Dfa::classify() {
  const std::size_t n = accepting_.size();
  // Backward reachability of acceptance.
  std::vector<char> live(accepting_.begin(), accepting_.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t q = 0; q < n; ++q) {
      if (live[q]) continue;
      for (std::size_t a = 0; a < letters_; ++a) {
        if (live[next(q, static_cast<Letter>(a))]) {
          live[q] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  rejecting_.assign(n, 0);
  for (std::size_t q = 0; q < n; ++q) rejecting_[q] = !live[q];
}

Dfa Dfa::from_tables(std::vector<std::string> propositions, std::size_t initial, std::vector<std::size_t> transitions,
                     std::vector<char> accepting) {
  Dfa d;
  require(propositions.size() <= 20, "too many propositions");
  d.propositions_ = std::move(propositions);
  d.letters_ = std::size_t{1} << d.propositions_.size();
  require(!accepting.empty() && initial < accepting.size(), "dfa: bad initial state");
  require(transitions.size() == accepting.size() * d.letters_, "dfa: transition table has the wrong size");
  for (auto t : transitions) require(t < accepting.size(), "dfa: transition target out of range");
  d.initial_ = initial;
  d.transitions_ = std::move(transitions);
  d.accepting_ = std::move(accepting);
  for (std::size_t q = 0; q < d.accepting_.size(); ++q) {
    if (!d.accepting_[q]) continue;
    for (std::size_t a = 0; a < d.letters_; ++a) require(d.accepting(d.next(q, static_cast<Letter>(a))), "dfa: accepting states must be absorbing");
  }
  d.classify();
  return d;
}

Dfa to_dfa(const ScltlFormula& formula, const std::vector<std::string>& propositions, std::size_t max_states) {
  require(propositions.size() <= 20, "too many propositions for an explicit alphabet");
  const std::size_t letters = std::size_t{1} << propositions.size();
  FormulaStore store;
  const int start = lower(formula, formula.root(), store, propositions);

  // Explore progressed formulas breadth first.
  std::map<int, std::size_t> index{{start, 0}};
  std::vector<int> states{start};
  std::vector<std::size_t> delta;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t a = 0; a < letters; ++a) {
      const int succ = store.progress(states[i], static_cast<Letter>(a));
      auto [it, inserted] = index.emplace(succ, states.size());
      if (inserted) {
        states.push_back(succ);
        require(states.size() <= max_states, "automaton exceeds " + std::to_string(max_states) + " states");
      }
      delta.push_back(it->second);
    }
  }
  const std::size_t n = states.size();

  // A state is a good prefix iff every infinite continuation reaches 'true';
  // the complement is the greatest set closed under "some successor stays".
  std::vector<char> bad(n);
  for (std::size_t q = 0; q < n; ++q) bad[q] = !store.is_true(states[q]);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t q = 0; q < n; ++q) {
      if (!bad[q]) continue;
      bool stays = false;
      for (std::size_t a = 0; a < letters && !stays; ++a) stays = bad[delta[q * letters + a]];
      if (!stays) {
        bad[q] = 0;
        changed = true;
      }
    }
  }

  // Moore refinement, starting from accepting / non-accepting.
  std::vector<std::size_t> block(n);
  for (std::size_t q = 0; q < n; ++q) block[q] = bad[q] ? 1 : 0;
  std::size_t blocks = 0;
  while (true) {
    std::map<std::vector<std::size_t>, std::size_t> signatures;
    std::vector<std::size_t> refined(n);
    for (std::size_t q = 0; q < n; ++q) {
      std::vector<std::size_t> sig{block[q]};
      for (std::size_t a = 0; a < letters; ++a) sig.push_back(block[delta[q * letters + a]]);
      refined[q] = signatures.emplace(std::move(sig), signatures.size()).first->second;
    }
    const std::size_t count = signatures.size();
    block.swap(refined);
    if (count == blocks) break;
    blocks = count;
  }

  // Renumber blocks in breadth-first order from the initial state.
  std::vector<std::size_t> representative(blocks, n);
  for (std::size_t q = 0; q < n; ++q) {
    if (representative[block[q]] == n) representative[block[q]] = q;
  }
  std::vector<std::size_t> order(blocks, blocks);
  std::deque<std::size_t> queue{block[0]};
  std::size_t next_id = 0;
  order[block[0]] = next_id++;
  while (!queue.empty()) {
    const std::size_t b = queue.front();
    queue.pop_front();
    for (std::size_t a = 0; a < letters; ++a) {
      const std::size_t t = block[delta[representative[b] * letters + a]];
      if (order[t] == blocks) {
        order[t] = next_id++;
        queue.push_back(t);
      }
    }
  }
  std::vector<std::size_t> transitions(next_id * letters);
  std::vector<char> accepting(next_id);
  for (std::size_t b = 0; b < blocks; ++b) {
    if (order[b] == blocks) continue;
    const std::size_t q = representative[b];
    accepting[order[b]] = !bad[q];
    for (std::size_t a = 0; a < letters; ++a) {
      transitions[order[b] * letters + a] = order[block[delta[q * letters + a]]];
    }
  }
  return Dfa::from_tables(propositions, 0, std::move(transitions), std::move(accepting));
}

// ----------------------------------------------------------------- labels

const char* to_string(Role role) noexcept {
  switch (role) {
    case Role::Goal: return "goal";
    case Role::Obstacle: return "obstacle";
    case Role::Neutral: return "neutral";
  }
  return "neutral";
}

Role role_from_string(const std::string& text) {
  if (text == "goal") return Role::Goal;
  if (text == "obstacle") return Role::Obstacle;
  if (text == "neutral") return Role::Neutral;
  throw ContractViolation("unknown proposition role '" + text + "' (expected goal, obstacle or neutral)");
}

LabeledRegions::LabeledRegions(std::vector<Proposition> propositions) : propositions_(std::move(propositions)) {
  require(propositions_.size() <= 20, "at most 20 propositions are supported");
  for (std::size_t i = 0; i < propositions_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      require(propositions_[i].name != propositions_[j].name, "duplicate proposition '" + propositions_[i].name + "'");
    }
  }
}

std::vector<std::string> LabeledRegions::names() const {
  std::vector<std::string> out;
  for (const auto& p : propositions_) out.push_back(p.name);
  return out;
}

std::size_t LabeledRegions::index(const std::string& name) const {
  for (std::size_t i = 0; i < propositions_.size(); ++i) {
    if (propositions_[i].name == name) return i;
  }
  throw ContractViolation("unknown proposition '" + name + "'");
}

Letter LabeledRegions::exact(const Vector& y) const {
  Letter out = 0;
  for (std::size_t i = 0; i < propositions_.size(); ++i) {
    for (const Box& b : propositions_[i].regions) {
      if (b.contains(y)) {
        out |= Letter{1} << i;
        break;
      }
    }
  }
  return out;
}

Letter LabeledRegions::robust(const Vector& y_hat, double epsilon, const std::optional<Box>& domain) const {
  require(epsilon >= 0.0, "robust labels need a nonnegative epsilon");
  require(!domain || domain->contains(y_hat, 1e-9), "robust labels: output lies outside its domain");
  // Outputs that can occur: the ball, clipped to the domain when given. With
  // the center in the domain, the clipped ball projects onto these intervals.
  Vector lo = y_hat.array() - epsilon, hi = y_hat.array() + epsilon;
  if (domain) {
    lo = lo.cwiseMax(domain->lower);
    hi = hi.cwiseMin(domain->upper);
  }
  Letter out = 0;
  for (std::size_t i = 0; i < propositions_.size(); ++i) {
    const auto& p = propositions_[i];
    bool inside = false, touches = false;
    for (const Box& b : p.regions) {
      inside = inside || ((lo.array() >= b.lower.array()) && (hi.array() <= b.upper.array())).all();
      Box reachable = b;
      if (domain) {
        reachable.lower = b.lower.cwiseMax(domain->lower);
        reachable.upper = b.upper.cwiseMin(domain->upper);
        if ((reachable.lower.array() > reachable.upper.array()).any()) continue;
      }
      touches = touches || reachable.distance(y_hat) <= epsilon;
    }
    bool asserted = inside;
    if (!inside && touches) {
      switch (p.role) {
        case Role::Goal: asserted = false; break;
        case Role::Obstacle: asserted = true; break;
        case Role::Neutral:
          throw ContractViolation("proposition '" + p.name + "' is ambiguous within epsilon of an output and has no goal/obstacle role");
      }
    }
    if (asserted) out |= Letter{1} << i;
  }
  return out;
}

}  // namespace ssr
