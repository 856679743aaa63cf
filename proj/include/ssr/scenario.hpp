#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssr/grid.hpp"
#include "ssr/logic.hpp"
#include "ssr/subsystem.hpp"

namespace ssr {

/// Schema violation in a scenario file; `pointer` is the JSON pointer of
/// the offending value.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& pointer, const std::string& what)
      : std::runtime_error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

struct SubsystemSpec {
  Subsystem system;
  std::string formula;
  std::vector<Proposition> propositions;
  /// Bound C on what this subsystem may send to others (output space).
  std::optional<Box> safe_set;
  GridOptions grid;
  SupSearchOptions search;
};

struct SynthesisSpec {
  /// Fixed number of backups; 0 iterates to `tolerance`.
  int horizon = 30;
  double tolerance = 1e-9;
};

struct ValidationSpec {
  std::size_t episodes = 10000;
  int horizon = 30;
  std::uint64_t seed = 1;
  std::size_t theta_samples = 3;
  /// Slack allowed below the bound before a check fails.
  double tolerance = 0.0;
  /// Joint initial states, one state per subsystem in scenario order.
  std::vector<std::vector<Vector>> initial_states;
};

struct Scenario {
  std::string name;
  std::vector<SubsystemSpec> subsystems;
  SynthesisSpec synthesis;
  ValidationSpec validation;
  /// The input with every default filled in.
  nlohmann::json resolved;

  std::size_t index(const std::string& id) const;
  std::vector<Subsystem> systems() const;
};

Scenario parse_scenario(const nlohmann::json& document);
/// Reads and validates a scenario file. Throws ScenarioError (schema) or
/// std::runtime_error (unreadable file or malformed JSON).
Scenario load_scenario(const std::string& path);

}  // namespace ssr
