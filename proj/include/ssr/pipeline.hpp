#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssr/scenario.hpp"
#include "ssr/validation.hpp"

namespace ssr {

enum class Stage { Certify, Abstract, Synthesize, Compose, Validate };

const char* to_string(Stage s) noexcept;
/// Comma separated stage names, e.g. "certify,abstract". Order in the text
/// does not matter; stages always run in pipeline order.
std::vector<Stage> parse_stages(const std::string& text);
std::vector<Stage> all_stages();

/// A stage failed; `stage` names it. Artifacts of completed stages are
/// already on disk.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(std::string("stage '") + to_string(stage) + "' failed: " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

/// Exclusive advisory lock on `<dir>/synth.lock`. The file stays behind
/// and records what was run; the lock itself dies with the process.
class OutputLock {
 public:
  explicit OutputLock(const std::string& directory);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

  void record(const std::string& text);

 private:
  int fd_ = -1;
};

struct PipelineOptions {
  std::vector<Stage> stages = all_stages();
  std::string out_dir = "out";
  /// Overrides the scenario's validation seed.
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::function<void(const std::string&)> log;
};

struct PipelineResult {
  std::vector<Stage> stages;
  /// Relative paths of every file written, in write order.
  std::vector<std::string> files;
  /// Per initial configuration (validation order).
  std::vector<GlobalBound> bounds;
  std::vector<BoundCheck> checks;
  bool validated = false;
  bool bounds_ok = true;
};

/// Runs the requested stages. Stages that are skipped but needed are read
/// back from `out_dir`. `scenario_bytes` is the raw scenario text used for
/// the manifest.
PipelineResult run_pipeline(const Scenario& scenario, const std::string& scenario_bytes,
                            const PipelineOptions& options);

/// Hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);

}  // namespace ssr
