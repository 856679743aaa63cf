#include "ssr/serialize.hpp"

#include <charconv>
#include <sstream>

#include "ssr/error.hpp"

namespace ssr {

using nlohmann::json;

namespace {

void check_version(const json& j, const char* what) {
  require(j.contains("version") && j.at("version").get<int>() == kArtifactVersion,
          std::string(what) + " artifact has an unsupported version");
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  require(ec == std::errc{}, "number formatting failed");
  return std::string(buf, end);
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

json to_json(const Box& b) { return {{"lower", to_json(b.lower)}, {"upper", to_json(b.upper)}}; }

Box box_from_json(const json& j) { return Box(vector_from_json(j.at("lower")), vector_from_json(j.at("upper"))); }

json to_json(const DeltaProfile& d) {
  if (d.is_constant()) return {{"constant", d.constant}};
  return {{"rows", d.rows}, {"cols", d.cols}, {"index", d.index}, {"values", d.values}};
}

DeltaProfile delta_from_json(const json& j) {
  if (j.contains("constant")) return DeltaProfile::uniform(j.at("constant").get<double>());
  return DeltaProfile::table(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                             j.at("values").get<std::vector<double>>(), j.at("index").get<std::string>());
}

json to_json(const SsrCertificate& c) {
  return {{"version", kArtifactVersion},
          {"id", c.id},
          {"kind", to_string(c.kind)},
          {"abstract_model", c.abstract_model},
          {"concrete_model", c.concrete_model},
          {"epsilon", c.epsilon},
          {"delta", to_json(c.delta)},
          {"delta_max", c.delta.max()},
          {"provenance", c.provenance}};
}

SsrCertificate certificate_from_json(const json& j) {
  check_version(j, "certificate");
  SsrCertificate c;
  c.id = j.at("id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  require(kind == "identity" || kind == "grid", "unknown relation kind '" + kind + "'");
  c.kind = kind == "grid" ? RelationKind::Grid : RelationKind::Identity;
  c.abstract_model = j.at("abstract_model").get<std::string>();
  c.concrete_model = j.at("concrete_model").get<std::string>();
  c.epsilon = j.at("epsilon").get<double>();
  c.delta = delta_from_json(j.at("delta"));
  c.provenance = j.at("provenance").get<std::vector<std::string>>();
  c.validate();
  return c;
}

json to_json(const Dfa& d) {
  std::vector<int> accepting;
  for (std::size_t q = 0; q < d.size(); ++q) accepting.push_back(d.accepting(q) ? 1 : 0);
  return {{"version", kArtifactVersion},
          {"propositions", d.propositions()},
          {"initial", d.initial()},
          {"accepting", accepting},
          {"transitions", d.transition_table()}};
}

Dfa dfa_from_json(const json& j) {
  check_version(j, "automaton");
  std::vector<char> accepting;
  for (int a : j.at("accepting").get<std::vector<int>>()) accepting.push_back(static_cast<char>(a != 0));
  return Dfa::from_tables(j.at("propositions").get<std::vector<std::string>>(), j.at("initial").get<std::size_t>(),
                          j.at("transitions").get<std::vector<std::size_t>>(), std::move(accepting));
}

json to_json(const ValueTable& t) {
  return {{"version", kArtifactVersion},
          {"states", t.states()},
          {"memory", t.memory()},
          {"iterations", t.iterations()},
          {"time_varying", t.time_varying()},
          {"residual", t.residual()},
          {"warnings", t.warnings()},
          {"values", t.values()},
          {"policies", t.policies()}};
}

ValueTable value_table_from_json(const json& j) {
  check_version(j, "value table");
  return ValueTable::from_parts(j.at("states").get<std::size_t>(), j.at("memory").get<std::size_t>(),
                                j.at("values").get<std::vector<double>>(),
                                j.at("policies").get<std::vector<std::vector<std::uint32_t>>>(),
                                j.at("time_varying").get<bool>(), j.at("iterations").get<int>(),
                                j.at("residual").get<double>());
}

json to_json(const GlobalBound& g) {
  json local = json::array();
  for (std::size_t i = 0; i < g.ids.size(); ++i) local.push_back({{"id", g.ids[i]}, {"bound", g.local[i]}});
  return {{"topology", to_string(g.topology)}, {"local", local}, {"combined", g.combined}, {"audit", g.audit}};
}

json to_json(const InterconnectionReport& r) {
  return {{"ok", r.ok}, {"violations", r.violations}, {"notes", r.notes}};
}

json to_json(const SimulationRun& r, bool with_verdicts) {
  json thetas = json::array(), x0 = json::array();
  for (const auto& t : r.thetas) thetas.push_back(to_json(t));
  for (const auto& x : r.x0) x0.push_back(to_json(x));
  json j = {{"thetas", thetas},
            {"x0", x0},
            {"seed", r.seed},
            {"horizon", r.horizon},
            {"episodes", r.episodes},
            {"successes", r.successes},
            {"rate", r.rate},
            {"wilson_lower", r.interval.lower},
            {"wilson_upper", r.interval.upper}};
  if (with_verdicts) {
    std::string bits;
    for (char v : r.verdicts) bits += v ? '1' : '0';
    j["verdicts"] = bits;
  }
  return j;
}

json to_json(const BoundCheck& c) {
  return {{"pass", c.pass},
          {"bound", c.bound},
          {"lower_confidence", c.lower_confidence},
          {"margin", c.margin},
          {"message", c.message}};
}

CsvTable::CsvTable(std::string kind, std::vector<std::string> columns)
    : kind_(std::move(kind)), columns_(std::move(columns)) {}

void CsvTable::add(const std::vector<std::string>& row) {
  require(row.size() == columns_.size(), "csv row has the wrong number of fields");
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    require(row[i].find_first_of(",\n\"") == std::string::npos, "csv field needs quoting: " + row[i]);
    line += (i ? "," : "") + row[i];
  }
  lines_.push_back(std::move(line));
}

void CsvTable::add(const std::vector<double>& row) {
  std::vector<std::string> text;
  for (double x : row) text.push_back(format_number(x));
  add(text);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  os << "# " << kind_ << " v" << kArtifactVersion << "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
  os << "\n";
  for (const auto& l : lines_) os << l << "\n";
  return os.str();
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace ssr
