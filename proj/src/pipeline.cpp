#include "ssr/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "ssr/error.hpp"
#include "ssr/serialize.hpp"

namespace ssr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<Stage, 5> kOrder = {Stage::Certify, Stage::Abstract, Stage::Synthesize, Stage::Compose,
                                         Stage::Validate};

}  // namespace

const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Certify:
      return "certify";
    case Stage::Abstract:
      return "abstract";
    case Stage::Synthesize:
      return "synthesize";
    case Stage::Compose:
      return "compose";
    case Stage::Validate:
      return "validate";
  }
  return "?";
}

std::vector<Stage> all_stages() { return {kOrder.begin(), kOrder.end()}; }

std::vector<Stage> parse_stages(const std::string& text) {
  std::vector<Stage> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    const auto it = std::find_if(kOrder.begin(), kOrder.end(), [&](Stage s) { return item == to_string(s); });
    require(it != kOrder.end(), "unknown stage '" + item + "'");
    if (std::find(out.begin(), out.end(), *it) == out.end()) out.push_back(*it);
  }
  require(!out.empty(), "no stages selected");
  std::sort(out.begin(), out.end());
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) == 1, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

OutputLock::OutputLock(const std::string& directory) {
  fs::create_directories(directory);
  const std::string path = (fs::path(directory) / "synth.lock").string();
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open lockfile " + path);
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw std::runtime_error("output directory " + directory + " is in use by another synth process");
  }
}

OutputLock::~OutputLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

void OutputLock::record(const std::string& text) {
  if (::ftruncate(fd_, 0) != 0 ||
      ::pwrite(fd_, text.data(), text.size(), 0) != static_cast<ssize_t>(text.size())) {
    throw std::runtime_error("cannot write lockfile");
  }
}

namespace {

struct Node {
  const SubsystemSpec* spec = nullptr;
  GridAbstraction grid;
  LabeledRegions regions;
  bool safety = false;
  std::optional<SsrCertificate> model_cert;
  std::optional<SsrCertificate> grid_cert;
  std::optional<SsrCertificate> cert;
  std::optional<Dfa> dfa;
  std::optional<ValueTable> table;
  std::optional<SynthesisProblem> problem;

  const Subsystem& system() const { return spec->system; }
  const std::string& id() const { return spec->system.id; }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing artifact " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> prefixed(const std::string& prefix, int count) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void append(std::vector<double>& row, const Vector& v) { row.insert(row.end(), v.data(), v.data() + v.size()); }

class Pipeline {
 public:
  Pipeline(const Scenario& sc, const std::string& bytes, const PipelineOptions& options)
      : sc_(sc), options_(options), root_(options.out_dir) {
    seed_ = options.seed.value_or(sc.validation.seed);
    resolved_ = sc.resolved;
    resolved_["validation"]["seed"] = seed_;
    scenario_sha_ = sha256_hex(bytes);
    resolved_sha_ = sha256_hex(dump(resolved_));

    std::map<std::string, Box> safe;
    for (const auto& spec : sc.subsystems) {
      if (spec.safe_set) safe.emplace(spec.system.id, *spec.safe_set);
    }
    network_ = Network::from_subsystems(sc.systems(), safe);
    for (const auto& spec : sc.subsystems) {
      auto node = std::make_unique<Node>();
      node->spec = &spec;
      node->grid = GridAbstraction::build(spec.system, spec.grid);
      node->regions = LabeledRegions(spec.propositions);
      node->safety = spec.safe_set.has_value() && sends(network_.index(spec.system.id));
      nodes_.push_back(std::move(node));
    }
  }

  PipelineResult run(OutputLock& lock) {
    result_.stages = options_.stages;
    json lockinfo = {{"scenario", sc_.name}, {"scenario_sha256", scenario_sha_}, {"seed", seed_}};
    for (Stage s : options_.stages) lockinfo["stages"].push_back(to_string(s));
    lock.record(dump(lockinfo));

    write("scenario.resolved.json", dump(resolved_));
    for (Stage stage : options_.stages) {
      current_ = stage;
      manifest_files_.clear();
      log(std::string("stage ") + to_string(stage));
      try {
        switch (stage) {
          case Stage::Certify:
            for (auto& n : nodes_) certify(*n);
            break;
          case Stage::Abstract:
            for (auto& n : nodes_) abstract(*n);
            break;
          case Stage::Synthesize:
            for (auto& n : nodes_) synthesize(*n);
            break;
          case Stage::Compose:
            compose();
            break;
          case Stage::Validate:
            validate();
            break;
        }
      } catch (const std::exception& e) {
        write_manifest();
        throw StageError(stage, e.what());
      }
      finish_stage(stage);
    }
    write_manifest();
    return result_;
  }

 private:
  const Scenario& sc_;
  const PipelineOptions& options_;
  fs::path root_;
  std::uint64_t seed_ = 0;
  json resolved_;
  std::string scenario_sha_;
  std::string resolved_sha_;
  Network network_;
  std::vector<std::unique_ptr<Node>> nodes_;
  PipelineResult result_;
  Stage current_ = Stage::Certify;
  std::vector<std::pair<std::string, std::string>> manifest_files_;
  json manifest_stages_ = json::array();

  void log(const std::string& text) const {
    if (options_.log) options_.log(text);
  }

  bool sends(std::size_t node) const {
    return std::any_of(network_.edges().begin(), network_.edges().end(),
                       [&](const Edge& e) { return e.from == node; });
  }

  void write(const std::string& rel, const std::string& text) {
    const fs::path target = root_ / rel;
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << text;
      if (!out) throw std::runtime_error("cannot write " + target.string());
    }
    fs::rename(tmp, target);
    manifest_files_.emplace_back(rel, sha256_hex(text));
    result_.files.push_back(rel);
  }

  json load(const std::string& rel, Stage producer) const {
    const fs::path p = root_ / rel;
    if (!fs::exists(p)) {
      throw std::runtime_error(rel + " not found; run stage '" + std::string(to_string(producer)) + "' first");
    }
    return json::parse(read_file(p));
  }

  void finish_stage(Stage stage) {
    std::string chain = scenario_sha_ + "\n" + resolved_sha_ + "\n" + std::to_string(seed_) + "\n" + to_string(stage) + "\n";
    json files = json::object();
    for (const auto& [path, sha] : manifest_files_) {
      chain += path + " " + sha + "\n";
      files[path] = sha;
    }
    manifest_stages_.push_back({{"stage", to_string(stage)}, {"files", files}, {"sha256", sha256_hex(chain)}});
    manifest_files_.clear();
  }

  void write_manifest() {
    const json manifest = {{"version", kArtifactVersion},
                           {"scenario", {{"name", sc_.name}, {"sha256", scenario_sha_}}},
                           {"resolved_sha256", resolved_sha_},
                           {"seed", seed_},
                           {"stages", manifest_stages_}};
    const std::string text = dump(manifest);
    const fs::path target = root_ / "manifest.json";
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out << text;
  }

  // certify: nominal-vs-true deficits over the grid index.
  void certify(Node& n) {
    const Subsystem& s = n.system();
    n.model_cert = grid_model_uncertainty_certificate(n.grid, s, n.spec->search);
    log(n.id() + ": model delta max " + format_number(n.model_cert->delta.max()));
    write(n.id() + "/model-certificate.json", dump(to_json(*n.model_cert)));

    std::vector<std::string> columns = {"cell", "input", "disturbance"};
    for (auto& c : prefixed("x", s.state_dim)) columns.push_back(c);
    for (auto& c : prefixed("u", s.input_dim())) columns.push_back(c);
    columns.push_back("delta");
    CsvTable csv("model-delta", columns);
    const DeltaProfile& d = n.model_cert->delta;
    const std::size_t dist = n.grid.disturbances();
    for (std::size_t cell = 0; cell < n.grid.cells(); ++cell) {
      const Vector x = n.grid.representative(cell);
      for (std::size_t a = 0; a < n.grid.inputs(); ++a) {
        for (std::size_t v = 0; v < dist; ++v) {
          std::vector<double> row = {double(cell), double(a), double(v)};
          append(row, x);
          append(row, n.grid.joint_input(a, v));
          row.push_back(d.at(cell, a * dist + v));
          csv.add(row);
        }
      }
    }
    write(n.id() + "/model-delta.csv", csv.str());
  }

  void ensure_transitions(Node& n) {
    if (!n.grid.has_transitions()) n.grid.fill_transitions(n.system());
  }

  // abstract: grid kernel and the grid-to-nominal certificate.
  void abstract(Node& n) {
    ensure_transitions(n);
    n.grid_cert = discretization_certificate(n.grid, n.system());
    log(n.id() + ": grid epsilon " + format_number(n.grid_cert->epsilon) + ", delta max " +
        format_number(n.grid_cert->delta.max()));
    json axes = json::array();
    for (const auto& a : n.grid.axes()) axes.push_back({{"lower", a.lower}, {"upper", a.upper}, {"count", a.count}});
    json inputs = json::array(), internal = json::array();
    for (const auto& p : n.grid.input_lattice().points) inputs.push_back(to_json(p));
    for (const auto& p : n.grid.internal_lattice().points) internal.push_back(to_json(p));
    const json grid = {{"version", kArtifactVersion}, {"signature", n.grid.signature()},
                       {"cells", n.grid.cells()},     {"axes", axes},
                       {"inputs", inputs},            {"internal", internal},
                       {"window", n.grid.options().window}};
    write(n.id() + "/grid.json", dump(grid));
    write(n.id() + "/grid-certificate.json", dump(to_json(*n.grid_cert)));
  }

  void ensure_certificates(Node& n) {
    if (!n.model_cert) n.model_cert = certificate_from_json(load(n.id() + "/model-certificate.json", Stage::Certify));
    if (!n.grid_cert) n.grid_cert = certificate_from_json(load(n.id() + "/grid-certificate.json", Stage::Abstract));
  }

  void build_problem(Node& n) {
    const std::optional<Box> safe = n.safety ? n.spec->safe_set : std::nullopt;
    n.problem = grid_problem(n.grid, n.system(), *n.dfa, n.regions, *n.cert, safe);
  }

  // synthesize: composed certificate, automaton, robust values.
  void synthesize(Node& n) {
    ensure_certificates(n);
    ensure_transitions(n);
    n.cert = compose_transitive(*n.grid_cert, *n.model_cert);
    n.dfa = to_dfa(ScltlFormula::parse(n.spec->formula), n.regions.names());
    build_problem(n);
    SynthesisOptions opt;
    opt.horizon = sc_.synthesis.horizon;
    opt.tolerance = sc_.synthesis.tolerance;
    opt.threads = options_.threads;
    n.table = robust_value_iteration(*n.problem, opt);
    for (const auto& w : n.table->warnings()) log(n.id() + ": " + w);

    write(n.id() + "/certificate.json", dump(to_json(*n.cert)));
    write(n.id() + "/automaton.json", dump(to_json(*n.dfa)));
    write(n.id() + "/values.json", dump(to_json(*n.table)));

    std::vector<std::string> columns = {"cell"};
    for (auto& c : prefixed("x", n.system().state_dim)) columns.push_back(c);
    columns.push_back("label");
    columns.push_back("safe");
    columns.push_back("bound");
    CsvTable csv("bound-surface", columns);
    for (std::size_t cell = 0; cell < n.grid.cells(); ++cell) {
      std::vector<double> row = {double(cell)};
      append(row, n.grid.representative(cell));
      row.push_back(n.problem->labels[cell]);
      row.push_back(n.problem->has_safety() ? n.problem->safe[cell] : 1);
      row.push_back(n.table->bound(*n.problem, cell));
      csv.add(row);
    }
    write(n.id() + "/bounds.csv", csv.str());
  }

  void ensure_synthesis(Node& n) {
    if (n.table) return;
    n.cert = certificate_from_json(load(n.id() + "/certificate.json", Stage::Synthesize));
    n.dfa = dfa_from_json(load(n.id() + "/automaton.json", Stage::Synthesize));
    n.table = value_table_from_json(load(n.id() + "/values.json", Stage::Synthesize));
    // The kernel is not stored; rebuilding it is deterministic.
    ensure_transitions(n);
    build_problem(n);
    require(n.table->states() == n.grid.cells() && n.table->memory() == n.dfa->size(),
            n.id() + ": stored value table does not match the scenario");
  }

  double local_bound(const Node& n, const Vector& x0) const {
    const auto cell = n.grid.locate(x0);
    return cell ? n.table->bound(*n.problem, *cell) : 0.0;
  }

  void compute_bounds() {
    for (auto& n : nodes_) ensure_synthesis(*n);
    result_.bounds.clear();
    for (const auto& config : sc_.validation.initial_states) {
      std::vector<double> local;
      for (std::size_t i = 0; i < nodes_.size(); ++i) local.push_back(local_bound(*nodes_[i], config[i]));
      result_.bounds.push_back(global_bound(network_, local));
    }
  }

  // compose: interconnection audit, induced certificate, global bounds.
  void compose() {
    compute_bounds();
    const InterconnectionReport report = validate_interconnection(network_, sc_.systems());
    require(report.ok, "interconnection is inadmissible");

    std::vector<SsrCertificate> certs;
    for (const auto& n : nodes_) certs.push_back(*n->cert);
    SsrCertificate induced;
    bool summarized = false;
    try {
      induced = induced_ssr(certs);
    } catch (const UnsupportedConfiguration&) {
      // Product table too large: combine the per-subsystem maxima instead.
      for (auto& c : certs) c.delta = DeltaProfile::uniform(c.delta.max());
      induced = induced_ssr(certs);
      summarized = true;
    }
    json shape = induced.delta.is_constant() ? json("constant") : json({induced.delta.rows, induced.delta.cols});
    const json induced_json = {{"id", induced.id},
                               {"epsilon", induced.epsilon},
                               {"delta_max", induced.delta.max()},
                               {"shape", shape},
                               {"summarized", summarized},
                               {"provenance", induced.provenance}};

    json edges = json::array();
    for (const auto& e : network_.edges()) {
      edges.push_back({{"from", network_.ids()[e.from]}, {"to", network_.ids()[e.to]}, {"output", e.output},
                       {"slot", e.slot}});
    }
    json bounds = json::array();
    for (std::size_t k = 0; k < result_.bounds.size(); ++k) {
      json x0 = json::array();
      for (const auto& x : sc_.validation.initial_states[k]) x0.push_back(to_json(x));
      json entry = to_json(result_.bounds[k]);
      entry["x0"] = x0;
      bounds.push_back(entry);
    }
    const json doc = {{"version", kArtifactVersion}, {"topology", to_string(network_.topology())},
                      {"ids", network_.ids()},       {"edges", edges},
                      {"interconnection", to_json(report)}, {"induced", induced_json},
                      {"bounds", bounds}};
    write("network.json", dump(doc));

    std::vector<std::string> columns = {"config"};
    for (const auto& n : nodes_) {
      for (auto& c : prefixed(n->id() + ".x", n->system().state_dim)) columns.push_back(c);
    }
    for (const auto& n : nodes_) columns.push_back(n->id() + ".bound");
    columns.push_back("global_bound");
    CsvTable csv("global-bounds", columns);
    for (std::size_t k = 0; k < result_.bounds.size(); ++k) {
      std::vector<double> row = {double(k)};
      for (const auto& x : sc_.validation.initial_states[k]) append(row, x);
      for (double b : result_.bounds[k].local) row.push_back(b);
      row.push_back(result_.bounds[k].combined);
      csv.add(row);
    }
    write("global-bounds.csv", csv.str());
    for (std::size_t k = 0; k < result_.bounds.size(); ++k) {
      log("config " + std::to_string(k) + ": global bound " + format_number(result_.bounds[k].combined));
    }
  }

  // validate: Monte Carlo on the true coupled system at sampled parameters.
  void validate() {
    if (result_.bounds.size() != sc_.validation.initial_states.size() || sc_.validation.initial_states.empty()) {
      compute_bounds();
    }
    const ValidationSpec& v = sc_.validation;
    std::vector<Controller> controllers;
    std::vector<std::vector<Vector>> thetas;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = *nodes_[i];
      controllers.push_back(Controller(n.grid, n.problem->labels, *n.dfa, *n.table));
      thetas.push_back(parameter_samples(n.system().theta_box, v.theta_samples, derive_seed(seed_, 0x7468, i)));
    }

    std::vector<std::string> columns = {"config", "sample"};
    for (const auto& n : nodes_) {
      for (auto& c : prefixed(n->id() + ".x", n->system().state_dim)) columns.push_back(c);
    }
    for (const auto& c : {"bound", "episodes", "successes", "rate", "wilson_lower", "wilson_upper", "margin", "pass"}) {
      columns.push_back(c);
    }
    CsvTable csv("validation", columns);
    json runs = json::array();
    result_.checks.clear();
    result_.bounds_ok = true;
    for (std::size_t k = 0; k < v.initial_states.size(); ++k) {
      for (std::size_t j = 0; j < v.theta_samples; ++j) {
        std::vector<Agent> agents;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
          agents.push_back({&nodes_[i]->system(), &controllers[i], &nodes_[i]->regions, thetas[i][j]});
        }
        MonteCarloConfig mc;
        mc.episodes = v.episodes;
        mc.horizon = v.horizon;
        mc.seed = derive_seed(seed_, k, j);
        mc.threads = options_.threads;
        const SimulationRun run = monte_carlo_estimate(network_, agents, v.initial_states[k], mc);
        const BoundCheck check = check_bound(run, result_.bounds[k].combined, v.tolerance);
        result_.checks.push_back(check);
        result_.bounds_ok = result_.bounds_ok && check.pass;
        log("config " + std::to_string(k) + " sample " + std::to_string(j) + ": " + check.message);

        std::vector<double> row = {double(k), double(j)};
        for (const auto& x : v.initial_states[k]) append(row, x);
        row.insert(row.end(), {check.bound, double(run.episodes), double(run.successes), run.rate,
                               run.interval.lower, run.interval.upper, check.margin, check.pass ? 1.0 : 0.0});
        csv.add(row);
        runs.push_back({{"config", k}, {"sample", j}, {"run", to_json(run, true)}, {"check", to_json(check)}});
      }
    }
    result_.validated = true;
    write("validation.csv", csv.str());
    write("validation.json", dump({{"version", kArtifactVersion}, {"seed", seed_}, {"pass", result_.bounds_ok},
                                   {"runs", runs}}));
  }
};

}  // namespace

PipelineResult run_pipeline(const Scenario& scenario, const std::string& scenario_bytes,
                            const PipelineOptions& options) {
  require(!options.stages.empty(), "no stages selected");
  require(std::is_sorted(options.stages.begin(), options.stages.end()), "stages must be in pipeline order");
  OutputLock lock(options.out_dir);
  Pipeline pipeline(scenario, scenario_bytes, options);
  return pipeline.run(lock);
}

}  // namespace ssr
