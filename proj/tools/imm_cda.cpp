// Command-line front end: single episodes, Monte Carlo batches and the self-check.

#include "immcda/self_check.hpp"
#include "immcda/trace_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace immcda;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> seed, dt, steps, r_safe, threshold;
  bool disable_cda = false;
  std::string out_dir = ".";
};

void addCommonFlags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file or a summary.json to replay");
  cmd->add_option("--seed", f.seed, "base seed (fallback: $IMM_CDA_SEED)");
  cmd->add_option("--dt", f.dt, "step length in seconds");
  cmd->add_option("--steps", f.steps, "steps per episode");
  cmd->add_option("--r-safe", f.r_safe, "protected radius in metres");
  cmd->add_option("--threshold", f.threshold, "mode-probability hold threshold for est_mode");
  cmd->add_flag("--disable-cda", f.disable_cda, "run without conflict avoidance");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
}

ScenarioConfig buildConfig(const CommonFlags& f) {
  ConfigOverrides flags;
  if (f.seed) flags["seed"] = *f.seed;
  if (f.dt) flags["dt"] = *f.dt;
  if (f.steps) flags["steps"] = *f.steps;
  if (f.r_safe) flags["r_safe"] = *f.r_safe;
  if (f.threshold) flags["mode_threshold"] = *f.threshold;
  if (f.disable_cda) flags["cda_enabled"] = "false";
  std::optional<fs::path> file;
  if (!f.config.empty()) file = f.config;
  return resolveConfig(file, flags, std::getenv(kSeedEnvVar));
}

std::string utcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path episodePath(const fs::path& dir, std::uint64_t seed) {
  return dir / ("episode_" + std::to_string(seed) + ".csv");
}

int runCommand(const CommonFlags& f) {
  const ScenarioConfig cfg = buildConfig(f);
  fs::create_directories(f.out_dir);
  const EpisodeTrace trace = runEpisode(cfg);
  const fs::path out = episodePath(f.out_dir, cfg.seed);
  writeEpisodeCsv(trace, out);
  const auto& s = trace.summary;
  std::cout << "seed " << cfg.seed << ": min separation " << s.min_separation << " m, "
            << (s.breached ? "breached" : "clear") << ", " << s.advisories << " advisories\n"
            << "wrote " << out.string() << '\n';
  return 0;
}

int monteCarloCommand(const CommonFlags& f, std::optional<int> episodes, bool emit_traces) {
  const ScenarioConfig cfg = buildConfig(f);
  int n = episodes.value_or(15);
  if (!episodes && fs::path(f.config).extension() == ".json") {
    n = static_cast<int>(readSummaryJson(f.config).manifest.seeds.size());
  }
  fs::create_directories(f.out_dir);

  RunManifest manifest;
  manifest.config = cfg;
  const MonteCarloSummary summary =
      runMonteCarlo(cfg, n, [&](const EpisodeTrace& trace) {
        if (!emit_traces) return;
        const fs::path out = episodePath(f.out_dir, trace.config.seed);
        writeEpisodeCsv(trace, out);
        manifest.outputs.push_back(out.string());
      });
  const fs::path json_path = fs::path(f.out_dir) / "summary.json";
  manifest.seeds = summary.seeds;
  manifest.outputs.push_back(json_path.string());
  manifest.timestamp = utcTimestamp();
  writeSummaryJson(summary, manifest, json_path);

  std::cout << "episodes " << summary.n_episodes << ", breach fraction " << summary.breach_fraction
            << ", median min separation " << summary.min_sep_median << " m\n"
            << "position rmse est " << summary.rmsePositionEst() << " m, meas "
            << summary.rmsePositionMeas() << " m, mode accuracy " << summary.modeAccuracy()
            << "\nwrote " << json_path.string() << '\n';
  return 0;
}

int checkCommand(std::optional<std::string> seed, int episodes) {
  SelfCheckOptions opts;
  if (seed) {
    opts.seed = std::stoull(*seed);
  } else if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env != '\0') {
    opts.seed = std::stoull(env);
  }
  opts.episodes = episodes;
  int failed = 0;
  for (const auto& r : runSelfChecks(opts)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.module << ": " << r.name;
    if (!r.passed) {
      std::cout << " -- " << r.detail;
      ++failed;
    }
    std::cout << '\n';
  }
  std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed")
            << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IMM tracking with conflict detection and avoidance"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "simulate one episode and write its CSV trace");
  addCommonFlags(run, run_flags);

  CommonFlags mc_flags;
  std::optional<int> episodes;
  bool emit_traces = false;
  auto* mc = app.add_subcommand("monte-carlo", "simulate a batch and write summary.json");
  addCommonFlags(mc, mc_flags);
  mc->add_option("--episodes", episodes, "number of episodes (seeds seed .. seed+n-1)");
  mc->add_flag("--emit-traces", emit_traces, "also write one CSV per episode");

  std::optional<std::string> check_seed;
  int check_episodes = 200;
  auto* check = app.add_subcommand("check", "run the invariant self-checks");
  check->add_option("--seed", check_seed, "seed for the randomised checks");
  check->add_option("--episodes", check_episodes, "episodes for the statistical checks")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) return runCommand(run_flags);
    if (mc->parsed()) return monteCarloCommand(mc_flags, episodes, emit_traces);
    return checkCommand(check_seed, check_episodes);
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateMeasurementError& e) {
    std::cerr << "error: numerical failure in " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
