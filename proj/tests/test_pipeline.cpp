#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "ssr/error.hpp"
#include "ssr/pipeline.hpp"
#include "ssr/serialize.hpp"

using namespace ssr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Fixture {
  std::string bytes;
  Scenario scenario;

  explicit Fixture(const std::string& name)
      : bytes(slurp(fs::path(SSR_TEST_DATA) / name)), scenario(parse_scenario(json::parse(bytes))) {}
};

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ssr-pipeline-" + name);
  fs::remove_all(p);
  return p;
}

PipelineResult run(const Fixture& f, const fs::path& dir, const std::string& stages = "",
                   std::optional<std::uint64_t> seed = std::nullopt, int threads = 1) {
  PipelineOptions o;
  if (!stages.empty()) o.stages = parse_stages(stages);
  o.out_dir = dir.string();
  o.seed = seed;
  o.threads = threads;
  return run_pipeline(f.scenario, f.bytes, o);
}

// Every artifact except the run bookkeeping.
std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    if (rel == "manifest.json" || rel == "synth.lock") continue;
    out[rel] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST(Pipeline, ParseStages) {
  EXPECT_EQ(parse_stages("validate, certify"), (std::vector<Stage>{Stage::Certify, Stage::Validate}));
  EXPECT_EQ(parse_stages("abstract,abstract").size(), 1u);
  EXPECT_THROW(parse_stages("certify,plot"), ContractViolation);
  EXPECT_THROW(parse_stages(""), ContractViolation);
}

TEST(Pipeline, CertifyOnlyEmitsModelDeltas) {
  const Fixture f("mini-delivery.json");
  const fs::path dir = fresh_dir("certify");
  const auto r = run(f, dir, "certify");
  EXPECT_FALSE(r.validated);
  std::set<std::string> names;
  for (const auto& [rel, text] : artifacts(dir)) names.insert(rel);
  EXPECT_EQ(names, (std::set<std::string>{"scenario.resolved.json", "agent/model-certificate.json",
                                          "agent/model-delta.csv"}));
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  ASSERT_EQ(manifest.at("stages").size(), 1u);
  EXPECT_EQ(manifest["stages"][0]["stage"], "certify");
}

TEST(Pipeline, FullRunIsDeterministic) {
  const Fixture f("mini-delivery.json");
  const fs::path a = fresh_dir("det-a"), b = fresh_dir("det-b"), c = fresh_dir("det-c");
  const auto ra = run(f, a);
  run(f, b);
  run(f, c, "", std::nullopt, 3);
  EXPECT_TRUE(ra.validated);
  EXPECT_TRUE(ra.bounds_ok);
  EXPECT_EQ(artifacts(a), artifacts(b));
  EXPECT_EQ(artifacts(a), artifacts(c)) << "thread count leaked into the outputs";
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(c / "manifest.json"));
}

TEST(Pipeline, StagesResumeFromArtifacts) {
  for (const std::string name : {"mini-delivery.json", "mini-platoon.json"}) {
    const Fixture f(name);
    const fs::path whole = fresh_dir("whole"), split = fresh_dir("split");
    run(f, whole);
    run(f, split, "certify");
    run(f, split, "abstract");
    run(f, split, "synthesize");
    run(f, split, "compose,validate");
    EXPECT_EQ(artifacts(whole), artifacts(split)) << name;
    // Validation alone reproduces the same report.
    fs::remove(split / "validation.json");
    run(f, split, "validate");
    EXPECT_EQ(slurp(whole / "validation.json"), slurp(split / "validation.json")) << name;
  }
}

TEST(Pipeline, MissingArtifactNamesTheStage) {
  const Fixture f("mini-delivery.json");
  const fs::path dir = fresh_dir("missing");
  try {
    run(f, dir, "compose");
    FAIL() << "compose ran without synthesis artifacts";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::Compose);
    EXPECT_NE(std::string(e.what()).find("synthesize"), std::string::npos) << e.what();
  }
  // The manifest still records what ran before the failure.
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Pipeline, LockExcludesSecondRun) {
  const Fixture f("mini-delivery.json");
  const fs::path dir = fresh_dir("lock");
  {
    OutputLock held(dir.string());
    EXPECT_THROW(run(f, dir, "certify"), std::runtime_error);
  }
  EXPECT_NO_THROW(run(f, dir, "certify"));
  EXPECT_TRUE(fs::exists(dir / "synth.lock"));
}

TEST(Pipeline, ManifestTracksInputBytes) {
  const Fixture f("mini-delivery.json");
  const fs::path a = fresh_dir("m-a"), b = fresh_dir("m-b"), c = fresh_dir("m-c");
  run(f, a, "certify");
  run(f, b, "certify", 99);
  Fixture g = f;
  g.bytes += " ";
  run(g, c, "certify");
  const json ma = json::parse(slurp(a / "manifest.json"));
  const json mb = json::parse(slurp(b / "manifest.json"));
  const json mc = json::parse(slurp(c / "manifest.json"));
  EXPECT_NE(ma["stages"][0]["sha256"], mb["stages"][0]["sha256"]);
  EXPECT_NE(ma["stages"][0]["sha256"], mc["stages"][0]["sha256"]);
  EXPECT_NE(ma["scenario"]["sha256"], mc["scenario"]["sha256"]);
  // Same artifact bytes though: only the provenance moved.
  EXPECT_EQ(ma["stages"][0]["files"], mc["stages"][0]["files"]);
}

TEST(Pipeline, ArtifactsRoundTrip) {
  const Fixture f("mini-delivery.json");
  const fs::path dir = fresh_dir("roundtrip");
  run(f, dir, "certify,abstract,synthesize");
  for (const std::string name : {"model-certificate.json", "grid-certificate.json", "certificate.json"}) {
    const std::string text = slurp(dir / "agent" / name);
    EXPECT_EQ(dump(to_json(certificate_from_json(json::parse(text)))), text) << name;
  }
  const std::string dfa = slurp(dir / "agent/automaton.json");
  EXPECT_EQ(dump(to_json(dfa_from_json(json::parse(dfa)))), dfa);
  const std::string values = slurp(dir / "agent/values.json");
  EXPECT_EQ(dump(to_json(value_table_from_json(json::parse(values)))), values);
}

TEST(Pipeline, BoundSurfaceHasOneRowPerCell) {
  const Fixture f("mini-delivery.json");
  const fs::path dir = fresh_dir("surface");
  run(f, dir, "certify,abstract,synthesize");
  std::ifstream in(dir / "agent/bounds.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# bound-surface v1");
  std::getline(in, line);
  EXPECT_EQ(line, "cell,x0,x1,label,safe,bound");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const double bound = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_GE(bound, 0.0);
    EXPECT_LE(bound, 1.0);
  }
  EXPECT_EQ(rows, 81);
}

TEST(Pipeline, CascadedBoundIsProductOfLocals) {
  const Fixture f("mini-platoon.json");
  const fs::path dir = fresh_dir("cascade");
  const auto r = run(f, dir, "certify,abstract,synthesize,compose");
  ASSERT_EQ(r.bounds.size(), 1u);
  const GlobalBound& g = r.bounds[0];
  EXPECT_EQ(g.topology, Topology::Cascaded);
  ASSERT_EQ(g.local.size(), 2u);
  EXPECT_EQ(g.combined, g.local[0] * g.local[1]);
  const json net = json::parse(slurp(dir / "network.json"));
  EXPECT_EQ(net["topology"], "cascaded");
  EXPECT_TRUE(net["interconnection"]["ok"].get<bool>());
  EXPECT_EQ(net["edges"][0]["from"], "leader");
}

TEST(Serialize, NumbersRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -0.0}) {
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
  CsvTable t("demo", {"a", "b"});
  t.add(std::vector<double>{1.5, 2});
  EXPECT_EQ(t.str(), "# demo v1\na,b\n1.5,2\n");
  EXPECT_THROW(t.add(std::vector<double>{1}), ContractViolation);
}
