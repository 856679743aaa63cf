#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ssr/certificate.hpp"
#include "ssr/logic.hpp"
#include "ssr/network.hpp"
#include "ssr/synthesis.hpp"
#include "ssr/validation.hpp"

namespace ssr {

/// Bumped whenever an artifact layout changes.
inline constexpr int kArtifactVersion = 1;

nlohmann::json to_json(const Box& b);
Box box_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DeltaProfile& d);
DeltaProfile delta_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SsrCertificate& c);
SsrCertificate certificate_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Dfa& d);
Dfa dfa_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ValueTable& t);
ValueTable value_table_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GlobalBound& g);
nlohmann::json to_json(const InterconnectionReport& r);
nlohmann::json to_json(const SimulationRun& r, bool with_verdicts = false);
nlohmann::json to_json(const BoundCheck& c);

/// Shortest text that parses back to the same double.
std::string format_number(double x);

/// Minimal CSV writer: a version comment line, a header row, then rows.
class CsvTable {
 public:
  CsvTable(std::string kind, std::vector<std::string> columns);
  void add(const std::vector<std::string>& row);
  void add(const std::vector<double>& row);
  std::string str() const;

 private:
  std::string kind_;
  std::vector<std::string> columns_;
  std::vector<std::string> lines_;
};

/// Artifact text with a trailing newline; keys come out sorted, so equal
/// values give equal bytes.
std::string dump(const nlohmann::json& j);

}  // namespace ssr
