// synth: runs the certify -> abstract -> synthesize -> compose -> validate
// pipeline for one scenario file.
//
// Exit codes: 0 everything passed, 2 a Monte Carlo bound check failed,
// 1 any error. SYNTH_LOG_LEVEL=quiet|info|debug controls stderr chatter.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ssr/pipeline.hpp"

namespace {

enum class Level { Quiet, Info, Debug };

Level log_level() {
  const char* env = std::getenv("SYNTH_LOG_LEVEL");
  if (!env) return Level::Info;
  const std::string v(env);
  if (v == "quiet" || v == "error") return Level::Quiet;
  if (v == "debug") return Level::Debug;
  return Level::Info;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust abstraction-based controller synthesis"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run pipeline stages for a scenario");

  std::string scenario_path;
  std::string stages = "certify,abstract,synthesize,compose,validate";
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--stages", stages, "Comma separated subset of certify,abstract,synthesize,compose,validate");
  run->add_option("--out", out_dir, "Output directory");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the validation seed");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const Level level = log_level();
  try {
    ssr::PipelineOptions options;
    options.stages = ssr::parse_stages(stages);
    options.out_dir = out_dir;
    if (seed_opt->count() > 0) options.seed = seed;
    options.threads = threads;
    if (level != Level::Quiet) {
      options.log = [](const std::string& line) { std::cerr << "synth: " << line << "\n"; };
    }

    const std::string bytes = read_all(scenario_path);
    const ssr::Scenario scenario = ssr::parse_scenario(nlohmann::json::parse(bytes));
    const ssr::PipelineResult result = ssr::run_pipeline(scenario, bytes, options);

    if (level == Level::Debug) {
      for (const auto& f : result.files) std::cerr << "synth: wrote " << f << "\n";
    }
    for (std::size_t k = 0; k < result.bounds.size(); ++k) {
      std::cout << "config " << k << " global bound " << result.bounds[k].combined << "\n";
    }
    if (result.validated) {
      std::cout << (result.bounds_ok ? "validation passed" : "validation FAILED") << "\n";
      if (!result.bounds_ok) return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "synth: error: " << e.what() << "\n";
    return 1;
  }
}
