#include "ssr/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "ssr/error.hpp"
#include "ssr/network.hpp"

namespace ssr {

using nlohmann::json;

namespace {

// Read-only cursor that remembers its JSON pointer and rejects unknown
// keys once all expected fields have been looked at.
class Cursor {
 public:
  Cursor(const json& value, std::string pointer) : value_(value), pointer_(std::move(pointer)) {}

  [[noreturn]] void fail(const std::string& what) const { throw ScenarioError(pointer_.empty() ? "/" : pointer_, what); }

  const json& raw() const { return value_; }
  const std::string& pointer() const { return pointer_; }

  Cursor operator[](const std::string& key) const {
    expect_object();
    seen_.insert(key);
    const auto it = value_.find(key);
    if (it == value_.end()) throw ScenarioError(child_pointer(key), "missing required field");
    return Cursor(*it, child_pointer(key));
  }

  std::optional<Cursor> optional(const std::string& key) const {
    expect_object();
    seen_.insert(key);
    const auto it = value_.find(key);
    if (it == value_.end() || it->is_null()) return std::nullopt;
    return Cursor(*it, child_pointer(key));
  }

  Cursor operator[](std::size_t i) const {
    return Cursor(value_.at(i), pointer_ + "/" + std::to_string(i));
  }

  std::size_t size() const {
    expect_array();
    return value_.size();
  }

  void finish() const {
    for (const auto& [key, _] : value_.items()) {
      if (!seen_.count(key)) throw ScenarioError(child_pointer(key), "unknown field");
    }
  }

  double number() const {
    if (!value_.is_number()) fail("expected a number");
    return value_.get<double>();
  }
  std::int64_t integer() const {
    if (!value_.is_number_integer()) fail("expected an integer");
    return value_.get<std::int64_t>();
  }
  int positive_int() const {
    const auto v = integer();
    if (v <= 0 || v > 1000000000) fail("expected a positive integer");
    return static_cast<int>(v);
  }
  bool boolean() const {
    if (!value_.is_boolean()) fail("expected true or false");
    return value_.get<bool>();
  }
  std::string string() const {
    if (!value_.is_string()) fail("expected a string");
    return value_.get<std::string>();
  }

  void expect_object() const {
    if (!value_.is_object()) fail("expected an object");
  }
  void expect_array() const {
    if (!value_.is_array()) fail("expected an array");
  }

  Vector vector(Eigen::Index expected = -1) const {
    expect_array();
    if (expected >= 0 && static_cast<Eigen::Index>(value_.size()) != expected) {
      fail("expected " + std::to_string(expected) + " entries, found " + std::to_string(value_.size()));
    }
    Vector v(static_cast<Eigen::Index>(value_.size()));
    for (std::size_t i = 0; i < value_.size(); ++i) v[static_cast<Eigen::Index>(i)] = (*this)[i].number();
    return v;
  }

  std::vector<int> counts(std::size_t expected) const {
    expect_array();
    if (value_.size() != expected) fail("expected " + std::to_string(expected) + " entries");
    std::vector<int> out;
    for (std::size_t i = 0; i < value_.size(); ++i) out.push_back((*this)[i].positive_int());
    return out;
  }

  Box box(Eigen::Index dimension) const {
    const Vector lo = (*this)["lower"].vector(dimension);
    const Vector hi = (*this)["upper"].vector(dimension);
    finish();
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
      if (!(lo[d] <= hi[d])) fail("lower bound exceeds upper bound in coordinate " + std::to_string(d));
    }
    return Box(lo, hi);
  }

  Expression expression() const {
    try {
      if (value_.is_number()) return Expression::constant(value_.get<double>());
      return Expression::parse(string());
    } catch (const ParseError& e) {
      fail(std::string("bad expression: ") + e.what());
    }
  }

 private:
  const json& value_;
  std::string pointer_;
  mutable std::set<std::string> seen_;

  std::string child_pointer(const std::string& key) const {
    std::string escaped;
    for (char c : key) {
      if (c == '~') escaped += "~0";
      else if (c == '/') escaped += "~1";
      else escaped += c;
    }
    return pointer_ + "/" + escaped;
  }
};

json box_json(const Box& b) {
  return {{"lower", std::vector<double>(b.lower.data(), b.lower.data() + b.lower.size())},
          {"upper", std::vector<double>(b.upper.data(), b.upper.data() + b.upper.size())}};
}

void check_expression_ranges(const Cursor& at, const Expression& e, int states, int inputs, int params) {
  auto name = [](Variable v) { return v == Variable::State ? "x" : v == Variable::Input ? "u" : "theta"; };
  const std::pair<Variable, int> limits[] = {{Variable::State, states}, {Variable::Input, inputs}, {Variable::Parameter, params}};
  for (const auto& [kind, limit] : limits) {
    const int top = e.max_index(kind);
    if (top >= limit) {
      at.fail(std::string("expression references ") + name(kind) + "[" + std::to_string(top) + "] but only " +
              std::to_string(limit) + " exist");
    }
  }
}

SubsystemSpec parse_subsystem(const Cursor& c, json& echo) {
  c.expect_object();
  SubsystemSpec spec;
  Subsystem& s = spec.system;
  s.id = c["id"].string();
  // Ids name output subdirectories.
  const bool plain = std::all_of(s.id.begin(), s.id.end(), [](unsigned char ch) {
    return std::isalnum(ch) || ch == '_' || ch == '-';
  });
  if (s.id.empty() || !plain) c["id"].fail("subsystem id must be non-empty and use only letters, digits, '_' and '-'");

  const Cursor dyn = c["dynamics"];
  const std::size_t n = dyn.size();
  if (n == 0) dyn.fail("dynamics needs at least one coordinate");
  s.state_dim = static_cast<int>(n);
  s.external_inputs = static_cast<int>(c["external_inputs"].integer());
  if (s.external_inputs < 0) c["external_inputs"].fail("must be nonnegative");

  if (auto internal = c.optional("internal_inputs")) {
    for (std::size_t i = 0; i < internal->size(); ++i) {
      const Cursor e = (*internal)[i];
      InternalInput in{e["source"].string(), static_cast<int>(e["output"].integer())};
      e.finish();
      s.internal_inputs.push_back(in);
    }
  }

  const Cursor theta = c["theta"];
  const Vector theta_lo = theta["lower"].vector();
  const Eigen::Index p = theta_lo.size();
  const Vector theta_hi = theta["upper"].vector(p);
  if (!(theta_lo.array() <= theta_hi.array()).all()) theta.fail("lower bound exceeds upper bound");
  s.theta_box = Box(theta_lo, theta_hi);
  s.theta_nominal = theta["nominal"].vector(p);
  theta.finish();
  if (!s.theta_box.contains(s.theta_nominal)) theta["nominal"].fail("nominal parameter lies outside the parameter box");

  for (std::size_t i = 0; i < n; ++i) {
    const Expression e = dyn[i].expression();
    check_expression_ranges(dyn[i], e, s.state_dim, s.input_dim(), static_cast<int>(p));
    s.dynamics.push_back(e);
  }

  s.state_box = c["state_box"].box(s.state_dim);
  if (!s.state_box.has_volume()) c["state_box"].fail("state box must have positive width in every coordinate");
  s.input_box = c["input_box"].box(s.external_inputs);
  if (!s.internal_inputs.empty()) {
    s.internal_box = c["internal_box"].box(static_cast<Eigen::Index>(s.internal_inputs.size()));
  } else {
    (void)c.optional("internal_box");
    s.internal_box = Box(Vector(0), Vector(0));
  }

  if (auto out = c.optional("output")) {
    const Cursor m = (*out)["matrix"];
    const std::size_t rows = m.size();
    s.output.matrix = Matrix(static_cast<Eigen::Index>(rows), s.state_dim);
    for (std::size_t r = 0; r < rows; ++r) s.output.matrix.row(static_cast<Eigen::Index>(r)) = m[r].vector(s.state_dim);
    s.output.offset = (*out)["offset"].vector(static_cast<Eigen::Index>(rows));
    out->finish();
  } else {
    s.output = OutputMap::identity(s.state_dim);
  }
  if (auto ob = c.optional("output_box")) {
    s.output_box = ob->box(s.output.matrix.rows());
  } else {
    s.output_box = s.output.image(s.state_box);
  }

  const Cursor noise = c["noise"];
  const Cursor weights = noise["weights"];
  for (std::size_t k = 0; k < weights.size(); ++k) s.noise.weights.push_back(weights[k].number());
  const Cursor means = noise["means"];
  if (means.size() != s.noise.weights.size()) means.fail("one mean per mixture component");
  for (std::size_t k = 0; k < means.size(); ++k) {
    const Cursor mk = means[k];
    if (mk.size() != n) mk.fail("mean must have the state dimension");
    std::vector<Expression> row;
    for (std::size_t i = 0; i < n; ++i) {
      const Expression e = mk[i].expression();
      if (e.depends_on(Variable::State) || e.depends_on(Variable::Input)) mk[i].fail("noise means may depend on theta only");
      check_expression_ranges(mk[i], e, 0, 0, static_cast<int>(p));
      row.push_back(e);
    }
    s.noise.means.push_back(row);
  }
  const auto variances = noise.optional("variances");
  const auto covariances = noise.optional("covariances");
  if (variances.has_value() == covariances.has_value()) noise.fail("give exactly one of 'variances' or 'covariances'");
  if (variances) {
    if (variances->size() != s.noise.weights.size()) variances->fail("one variance vector per mixture component");
    for (std::size_t k = 0; k < variances->size(); ++k) {
      s.noise.covariances.push_back((*variances)[k].vector(s.state_dim).asDiagonal());
    }
  } else {
    if (covariances->size() != s.noise.weights.size()) covariances->fail("one covariance per mixture component");
    for (std::size_t k = 0; k < covariances->size(); ++k) {
      const Cursor ck = (*covariances)[k];
      if (ck.size() != n) ck.fail("covariance must be square of the state dimension");
      Matrix m(s.state_dim, s.state_dim);
      for (std::size_t r = 0; r < n; ++r) m.row(static_cast<Eigen::Index>(r)) = ck[r].vector(s.state_dim);
      s.noise.covariances.push_back(m);
    }
  }
  noise.finish();

  try {
    s.validate();
  } catch (const std::exception& e) {
    c.fail(e.what());
  }

  if (auto safe = c.optional("safe_set")) spec.safe_set = safe->box(s.output_box.dimension());

  // specification
  const Cursor sp = c["specification"];
  spec.formula = sp["formula"].string();
  ScltlFormula formula;
  try {
    formula = ScltlFormula::parse(spec.formula);
  } catch (const ParseError& e) {
    sp["formula"].fail(e.what());
  }
  const Cursor props = sp["propositions"];
  for (std::size_t i = 0; i < props.size(); ++i) {
    const Cursor pc = props[i];
    Proposition prop;
    prop.name = pc["name"].string();
    try {
      prop.role = role_from_string(pc["role"].string());
    } catch (const ContractViolation& e) {
      pc["role"].fail(e.what());
    }
    const Cursor regions = pc["regions"];
    for (std::size_t r = 0; r < regions.size(); ++r) {
      prop.regions.push_back(regions[r].box(s.output_box.dimension()));
      if (!s.output_box.contains(prop.regions.back(), 1e-12)) regions[r].fail("region must lie inside the output box");
    }
    pc.finish();
    for (const auto& other : spec.propositions) {
      if (other.name == prop.name) pc["name"].fail("duplicate proposition '" + prop.name + "'");
    }
    const auto polarity = formula.polarity(prop.name);
    if (prop.role == Role::Goal && (polarity & ScltlFormula::Negative)) {
      pc["role"].fail("goal proposition '" + prop.name + "' appears negated in the formula");
    }
    if (prop.role == Role::Obstacle && (polarity & ScltlFormula::Positive)) {
      pc["role"].fail("obstacle proposition '" + prop.name + "' appears un-negated in the formula");
    }
    spec.propositions.push_back(prop);
  }
  for (const auto& name : formula.propositions()) {
    bool found = false;
    for (const auto& prop : spec.propositions) found = found || prop.name == name;
    if (!found) sp["formula"].fail("proposition '" + name + "' has no region");
  }
  sp.finish();

  // abstraction
  const Cursor g = c["grid"];
  spec.grid.cells = g["cells"].counts(n);
  spec.grid.inputs = g["inputs"].counts(static_cast<std::size_t>(s.external_inputs));
  if (!s.internal_inputs.empty()) {
    spec.grid.internal = g["internal"].counts(s.internal_inputs.size());
  } else {
    (void)g.optional("internal");
  }
  if (auto w = g.optional("window")) {
    spec.grid.window = w->number();
    if (!(spec.grid.window >= 3.0)) w->fail("window must be at least 3 standard deviations");
  }
  g.finish();
  if (auto search = c.optional("parameter_search")) {
    if (auto v = search->optional("vertices")) spec.search.vertices = v->boolean();
    if (auto l = search->optional("lattice_points")) spec.search.lattice_points = l->positive_int();
    search->finish();
  }
  c.finish();

  echo["grid"]["window"] = spec.grid.window;
  echo["parameter_search"] = {{"vertices", spec.search.vertices}, {"lattice_points", spec.search.lattice_points}};
  if (!echo.contains("output")) echo["output"] = "identity";
  echo["output_box"] = box_json(s.output_box);
  return spec;
}

}  // namespace

std::size_t Scenario::index(const std::string& id) const {
  for (std::size_t i = 0; i < subsystems.size(); ++i) {
    if (subsystems[i].system.id == id) return i;
  }
  throw ContractViolation("unknown subsystem '" + id + "'");
}

std::vector<Subsystem> Scenario::systems() const {
  std::vector<Subsystem> out;
  for (const auto& s : subsystems) out.push_back(s.system);
  return out;
}

Scenario parse_scenario(const json& document) {
  const Cursor root(document, "");
  root.expect_object();
  Scenario sc;
  sc.resolved = document;
  sc.name = root["name"].string();
  const Cursor subs = root["subsystems"];
  if (subs.size() == 0) subs.fail("at least one subsystem is required");
  for (std::size_t i = 0; i < subs.size(); ++i) {
    json& echo = sc.resolved["subsystems"][i];
    sc.subsystems.push_back(parse_subsystem(subs[i], echo));
    for (std::size_t j = 0; j < i; ++j) {
      if (sc.subsystems[j].system.id == sc.subsystems[i].system.id) subs[i]["id"].fail("duplicate subsystem id");
    }
  }
  // cross references
  const auto systems = sc.systems();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const auto& internal = sc.subsystems[i].system.internal_inputs;
    for (std::size_t k = 0; k < internal.size(); ++k) {
      const Cursor at = subs[i]["internal_inputs"][k];
      bool found = false;
      for (const auto& s : systems) {
        if (s.id != internal[k].source) continue;
        found = true;
        if (internal[k].output < 0 || internal[k].output >= s.output_box.dimension()) {
          at["output"].fail("subsystem '" + s.id + "' has no output coordinate " + std::to_string(internal[k].output));
        }
      }
      if (!found) at["source"].fail("unknown subsystem '" + internal[k].source + "'");
    }
  }
  std::map<std::string, Box> safe;
  for (const auto& s : sc.subsystems) {
    if (s.safe_set) safe.emplace(s.system.id, *s.safe_set);
  }
  const Network net = Network::from_subsystems(systems, safe);
  const auto report = validate_interconnection(net, systems);
  if (!report.ok) subs.fail("interconnection: " + report.violations.front());
  if (net.topology() == Topology::Cyclic) {
    for (const auto& e : net.edges()) {
      if (net.on_cycle(e) && !net.safe_set(e.from)) {
        subs[e.from].fail("subsystem lies on a cycle and must declare a safe_set");
      }
    }
  }

  if (auto syn = root.optional("synthesis")) {
    if (auto h = syn->optional("horizon")) {
      sc.synthesis.horizon = static_cast<int>(h->integer());
      if (sc.synthesis.horizon < 0) h->fail("horizon must be nonnegative");
    }
    if (auto t = syn->optional("tolerance")) {
      sc.synthesis.tolerance = t->number();
      if (!(sc.synthesis.tolerance > 0)) t->fail("tolerance must be positive");
    }
    syn->finish();
  }
  sc.resolved["synthesis"] = {{"horizon", sc.synthesis.horizon}, {"tolerance", sc.synthesis.tolerance}};

  if (auto val = root.optional("validation")) {
    ValidationSpec& v = sc.validation;
    if (auto e = val->optional("episodes")) {
      v.episodes = static_cast<std::size_t>(e->positive_int());
      if (v.episodes < 100) e->fail("at least 100 episodes");
    }
    if (auto h = val->optional("horizon")) {
      v.horizon = static_cast<int>(h->integer());
      if (v.horizon < 0) h->fail("horizon must be nonnegative");
    }
    if (auto s = val->optional("seed")) {
      if (!s->raw().is_number_unsigned()) s->fail("seed must be a nonnegative integer");
      v.seed = s->raw().get<std::uint64_t>();
    }
    if (auto t = val->optional("theta_samples")) v.theta_samples = static_cast<std::size_t>(t->positive_int());
    if (auto t = val->optional("tolerance")) v.tolerance = t->number();
    if (auto init = val->optional("initial_states")) {
      for (std::size_t k = 0; k < init->size(); ++k) {
        const Cursor joint = (*init)[k];
        std::vector<Vector> states;
        for (const auto& spec : sc.subsystems) {
          const Cursor x = joint[spec.system.id];
          states.push_back(x.vector(spec.system.state_dim));
          if (!spec.system.state_box.contains(states.back())) x.fail("initial state lies outside the state box");
        }
        joint.finish();
        v.initial_states.push_back(states);
      }
    }
    val->finish();
  }
  const auto& v = sc.validation;
  sc.resolved["validation"]["episodes"] = v.episodes;
  sc.resolved["validation"]["horizon"] = v.horizon;
  sc.resolved["validation"]["seed"] = v.seed;
  sc.resolved["validation"]["theta_samples"] = v.theta_samples;
  sc.resolved["validation"]["tolerance"] = v.tolerance;
  if (!sc.resolved["validation"].contains("initial_states")) sc.resolved["validation"]["initial_states"] = json::array();
  root.finish();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read scenario file '" + path + "'");
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scenario file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(document);
}

}  // namespace ssr
