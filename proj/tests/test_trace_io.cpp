#include "immcda/trace_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

using namespace immcda;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("immcda_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void writeText(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string readText(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string withoutTimestamp(const std::string& json) {
  return std::regex_replace(json, std::regex("\"timestamp\": \"[^\"]*\""), "\"timestamp\": \"\"");
}

bool closeRel(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(formatDouble(0.1), "0.1");
  EXPECT_EQ(formatDouble(3000.0), "3000");
  EXPECT_EQ(formatDouble(-2.5e-7), "-2.5e-07");
  RandomStream rng(3, RandomStream::kProcessNoise);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.normal() * std::pow(10.0, 20.0 * rng.uniform() - 10.0);
    ASSERT_EQ(std::stod(formatDouble(v)), v);
  }
}

TEST(EpisodeCsv, HeaderAndRowCount) {
  ScenarioConfig cfg;
  cfg.seed = 7;
  const std::string csv = episodeCsv(runEpisode(cfg));
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "k,t,truth_x1,truth_vx1,truth_x2,truth_vx2,truth_omega,true_mode,z1,z2,est_x1,est_vx1,"
            "est_x2,est_vx2,est_omega,mu1,mu2,mu3,est_mode,advisory_theta,trigger_j,separation");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 61);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(csv.back(), '\n');
}

TEST(EpisodeCsv, RoundTripReproducesTrace) {
  ScenarioConfig cfg;
  cfg.seed = 21;
  const EpisodeTrace t = runEpisode(cfg);
  const fs::path dir = scratchDir("csv");
  writeEpisodeCsv(t, dir / "e.csv");
  const auto rows = readEpisodeCsv(dir / "e.csv");
  ASSERT_EQ(rows.size(), t.steps.size());
  int advisories = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const CsvRow& r = rows[i];
    const EpisodeStep& s = t.steps[i];
    EXPECT_EQ(r.at("k"), s.k);
    EXPECT_TRUE(closeRel(r.at("t"), s.t));
    const Vec5 x = s.truth.vector();
    const Vec5& e = s.estimate.mean;
    const char* tc[] = {"truth_x1", "truth_vx1", "truth_x2", "truth_vx2", "truth_omega"};
    const char* ec[] = {"est_x1", "est_vx1", "est_x2", "est_vx2", "est_omega"};
    for (int c = 0; c < 5; ++c) {
      EXPECT_TRUE(closeRel(r.at(tc[c]), x[c]));
      EXPECT_TRUE(closeRel(r.at(ec[c]), e[c]));
    }
    EXPECT_EQ(r.at("true_mode"), static_cast<int>(s.true_mode));
    EXPECT_EQ(r.at("est_mode"), static_cast<int>(s.est_mode));
    EXPECT_TRUE(closeRel(r.at("z1"), s.z[0]));
    EXPECT_TRUE(closeRel(r.at("z2"), s.z[1]));
    EXPECT_TRUE(closeRel(r.at("mu1"), s.mu[0]));
    EXPECT_TRUE(closeRel(r.at("mu2"), s.mu[1]));
    EXPECT_TRUE(closeRel(r.at("mu3"), s.mu[2]));
    EXPECT_NEAR(r.at("mu1") + r.at("mu2") + r.at("mu3"), 1.0, 1e-9);
    EXPECT_NEAR(r.at("separation"), std::hypot(r.at("truth_x1"), r.at("truth_x2")), 1e-6);
    if (s.advisory) {
      ++advisories;
      EXPECT_TRUE(closeRel(r.at("advisory_theta"), s.advisory->theta));
      EXPECT_EQ(r.at("trigger_j"), s.advisory->trigger_j);
    } else {
      EXPECT_FALSE(r.values.at("advisory_theta").has_value());
      EXPECT_FALSE(r.values.at("trigger_j").has_value());
    }
  }
  EXPECT_GT(advisories, 0);
}

TEST(EpisodeCsv, RejectsMalformedInput) {
  EXPECT_THROW((void)parseEpisodeCsv(""), ParseError);
  EXPECT_THROW((void)parseEpisodeCsv("a,b\n1,2\n"), ParseError);
  ScenarioConfig cfg;
  cfg.steps = 2;
  std::string csv = episodeCsv(runEpisode(cfg));
  EXPECT_THROW((void)parseEpisodeCsv(csv + "1,2,3\n"), ParseError);
  const auto pos = csv.rfind(',');
  csv.replace(pos + 1, 1, "x");
  EXPECT_THROW((void)parseEpisodeCsv(csv), ParseError);
}

TEST(EpisodeCsv, UnwritablePathNamed) {
  ScenarioConfig cfg;
  cfg.steps = 2;
  const fs::path bad = "/nonexistent_dir_immcda/e.csv";
  try {
    writeEpisodeCsv(runEpisode(cfg), bad);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(bad.string()), std::string::npos);
  }
}

TEST(ConfigText, EmptyGivesDefaults) {
  EXPECT_TRUE(parseConfigText("").empty());
  EXPECT_TRUE(parseConfigText("# only a comment\n\n   \n").empty());
  EXPECT_EQ(resolveConfig(std::nullopt, {}), ScenarioConfig{});
}

TEST(ConfigText, ParsesScalarsAndMatrices) {
  const std::string text =
      "# header\n"
      "dt = 0.5\n"
      "steps=80   # trailing comment\n"
      "cda_enabled = false\n"
      "seed = 18446744073709551615\n"
      "pi = [[0.9, 0.05, 0.05], [0.1, 0.85, 0.05], [0.1, 0.05, 0.85]]\n"
      "meas_cov = [100, 0, 0, 400]\n";
  const fs::path dir = scratchDir("cfg");
  writeText(dir / "a.cfg", text);
  const ScenarioConfig c = loadConfigFile(dir / "a.cfg");
  EXPECT_EQ(c.dt, 0.5);
  EXPECT_EQ(c.steps, 80);
  EXPECT_FALSE(c.cda_enabled);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.pi(1, 1), 0.85);
  EXPECT_EQ(c.meas_cov, (Mat2() << 100, 0, 0, 400).finished());
}

TEST(ConfigText, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      (void)parseConfigText(text, "f.cfg");
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("dt = 1\nwarp = 9\n").find("f.cfg line 2"), std::string::npos);
  EXPECT_NE(message("dt = 1\nwarp = 9\n").find("warp"), std::string::npos);
  EXPECT_NE(message("dt 1\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("steps = 2.5\n").find("steps"), std::string::npos);
  EXPECT_NE(message("cda_enabled = yes\n").find("cda_enabled"), std::string::npos);
  EXPECT_NE(message("pi = [1, 0, 0]\n").find("pi"), std::string::npos);
  EXPECT_NE(message("meas_cov = [[1, 0], [0]]\n").find("meas_cov"), std::string::npos);
  EXPECT_NE(message("seed = -3\n").find("seed"), std::string::npos);
}

TEST(ConfigText, FormatRoundTrips) {
  ScenarioConfig c;
  c.dt = 0.3;
  c.r_safe = 2750.125;
  c.process_cov(0, 2) = c.process_cov(2, 0) = 1.0 / 3.0;
  c.noise_free_truth = true;
  c.seed = 123456789012345ull;
  ScenarioConfig back;
  for (const auto& [k, v] : parseConfigText(formatConfig(c))) applyConfigValue(back, k, v, "echo");
  EXPECT_EQ(back, c);
}

TEST(ConfigResolution, Precedence) {
  const fs::path dir = scratchDir("prec");
  writeText(dir / "c.cfg", "r_safe = 2000\nsteps = 30\n");
  ConfigOverrides flags{{"r_safe", "3500"}};
  const ScenarioConfig c = resolveConfig(dir / "c.cfg", flags);
  EXPECT_EQ(c.r_safe, 3500.0);
  EXPECT_EQ(c.steps, 30);
  EXPECT_EQ(c.dt, 1.0);

  EXPECT_EQ(resolveConfig(std::nullopt, {}, "77").seed, 77u);
  writeText(dir / "s.cfg", "seed = 5\n");
  EXPECT_EQ(resolveConfig(dir / "s.cfg", {}, "77").seed, 5u);
  EXPECT_EQ(resolveConfig(dir / "s.cfg", {{"seed", "9"}}, "77").seed, 9u);
  EXPECT_THROW((void)resolveConfig(std::nullopt, {}, "abc"), ParseError);
}

TEST(ConfigResolution, InvalidValuesNameTheKey) {
  try {
    (void)resolveConfig(std::nullopt, {{"dt", "0"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "dt");
  }
  try {
    (void)resolveConfig(std::nullopt, {{"process_cov", "[1,0,0,0,0, 0,1,0,0,0, 0,0,-1,0,0, 0,0,0,1,0, 0,0,0,0,1]"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "process_cov");
  }
  try {
    (void)resolveConfig(std::nullopt, {{"r_safe", "far"}});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("--r-safe"), std::string::npos);
  }
  EXPECT_EQ(flagName("mode_threshold"), "--mode-threshold");
}

TEST(SummaryJson, RoundTrip) {
  ScenarioConfig cfg;
  cfg.seed = 60;
  const MonteCarloSummary s = runMonteCarlo(cfg, 12);
  RunManifest m;
  m.config = cfg;
  m.seeds = s.seeds;
  m.outputs = {"a.csv", "summary.json"};
  m.timestamp = "2000-01-01T00:00:00Z";
  const SummaryDocument d = parseSummaryJson(summaryJson(s, m));
  EXPECT_EQ(d.manifest.config, cfg);
  EXPECT_EQ(d.manifest.seeds, s.seeds);
  EXPECT_EQ(d.manifest.outputs, m.outputs);
  EXPECT_EQ(d.manifest.tool_version, kToolVersion);
  EXPECT_EQ(d.n_episodes, 12);
  EXPECT_TRUE(closeRel(d.min_sep_mean, s.min_sep_mean));
  EXPECT_TRUE(closeRel(d.min_sep_median, s.min_sep_median));
  EXPECT_TRUE(closeRel(d.min_sep_stddev, s.min_sep_stddev));
  EXPECT_TRUE(closeRel(d.breach_fraction, s.breach_fraction));
  EXPECT_TRUE(closeRel(d.rmse_position_est, s.rmsePositionEst()));
  EXPECT_TRUE(closeRel(d.rmse_position_meas, s.rmsePositionMeas()));
  EXPECT_TRUE(closeRel(d.mode_accuracy, s.modeAccuracy()));
  for (int a = 0; a < 2; ++a) {
    EXPECT_TRUE(closeRel(d.rmse_est_axis[a], s.est_error.rmseAxis()[a]));
    EXPECT_TRUE(closeRel(d.rmse_meas_axis[a], s.meas_error.rmseAxis()[a]));
    EXPECT_TRUE(closeRel(d.stddev_est_axis[a], s.est_error.stddevAxis()[a]));
    EXPECT_TRUE(closeRel(d.stddev_meas_axis[a], s.meas_error.stddevAxis()[a]));
  }
}

TEST(SummaryJson, SingleEpisodeValues) {
  ScenarioConfig cfg;
  cfg.seed = 17;
  const EpisodeTrace t = runEpisode(cfg);
  RunManifest m;
  m.config = cfg;
  const SummaryDocument d = parseSummaryJson(summaryJson(runMonteCarlo(cfg, 1), m));
  EXPECT_EQ(d.min_sep_mean, t.summary.min_separation);
  EXPECT_EQ(d.min_sep_median, t.summary.min_separation);
  EXPECT_EQ(d.breach_fraction, t.summary.breached ? 1.0 : 0.0);
  EXPECT_EQ(d.rmse_position_est, t.summary.est_error.rmseCombined());
  EXPECT_EQ(d.rmse_position_meas, t.summary.meas_error.rmseCombined());
  EXPECT_EQ(d.mode_accuracy, t.summary.modeAccuracy());
}

TEST(SummaryJson, DeterministicApartFromTimestamp) {
  ScenarioConfig cfg;
  cfg.seed = 5;
  RunManifest m1, m2;
  m1.config = m2.config = cfg;
  m1.timestamp = "2026-01-01T00:00:00Z";
  m2.timestamp = "2026-06-30T12:34:56Z";
  const std::string a = summaryJson(runMonteCarlo(cfg, 6), m1);
  const std::string b = summaryJson(runMonteCarlo(cfg, 6), m2);
  EXPECT_NE(a, b);
  EXPECT_EQ(withoutTimestamp(a), withoutTimestamp(b));
}

TEST(SummaryJson, ManifestReplayReproducesTraces) {
  const fs::path dir = scratchDir("replay");
  ScenarioConfig cfg;
  cfg.seed = 90;
  cfg.dt = 0.8;
  cfg.r_safe = 2600.0;
  cfg.cda_enabled = true;
  cfg.mode_threshold = 0.4;
  std::vector<std::string> first;
  const MonteCarloSummary s =
      runMonteCarlo(cfg, 3, [&](const EpisodeTrace& t) { first.push_back(episodeCsv(t)); });
  RunManifest m;
  m.config = cfg;
  m.seeds = s.seeds;
  m.timestamp = "x";
  writeSummaryJson(s, m, dir / "summary.json");

  const ScenarioConfig replay = loadConfigFile(dir / "summary.json");
  EXPECT_EQ(replay, cfg);
  std::vector<std::string> second;
  (void)runMonteCarlo(replay, static_cast<int>(readSummaryJson(dir / "summary.json").manifest.seeds.size()),
                      [&](const EpisodeTrace& t) { second.push_back(episodeCsv(t)); });
  EXPECT_EQ(first, second);
}

TEST(SummaryJson, RejectsMalformedDocuments) {
  EXPECT_THROW((void)parseSummaryJson("{"), ParseError);
  EXPECT_THROW((void)parseSummaryJson("{\"manifest\": {}}"), ParseError);
  const fs::path dir = scratchDir("badjson");
  writeText(dir / "x.json", "{\"n_episodes\": 3}");
  EXPECT_THROW((void)loadConfigFile(dir / "x.json"), ParseError);
}

TEST(SummaryJson, CombinedMeasurementRmseForDefaultNoise) {
  const ScenarioConfig cfg;
  RunManifest m;
  m.config = cfg;
  const SummaryDocument d = parseSummaryJson(summaryJson(runMonteCarlo(cfg, 100), m));
  EXPECT_NEAR(d.rmse_position_meas, 50.0 * std::sqrt(2.0), 0.05 * 50.0 * std::sqrt(2.0));
  EXPECT_NEAR(d.rmse_meas_axis[0], 50.0, 2.5);
  EXPECT_NEAR(d.rmse_meas_axis[1], 50.0, 2.5);
}
