#pragma once

#include "immcda/scenario.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace immcda {

inline constexpr const char* kToolVersion = "immcda 1.0.0";
inline constexpr const char* kSeedEnvVar = "IMM_CDA_SEED";

/// Column names of the per-step episode CSV, in order.
[[nodiscard]] const std::vector<std::string>& episodeCsvColumns();

/// Raised for unreadable or malformed input; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an output file cannot be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw key = value pairs from a config file; later lines override earlier ones.
using ConfigOverrides = std::map<std::string, std::string>;

/**
 * Parses the flat config format:
 *
 *     # comment
 *     dt = 0.5
 *     r_safe = 3000
 *     pi = [[0.8, 0.1, 0.1], [0.19, 0.8, 0.01], [0.19, 0.01, 0.8]]
 *     meas_cov = [2500, 0, 0, 2500]      # flat row-major also accepted
 *
 * Unknown keys and malformed lines raise ParseError naming the line.
 */
[[nodiscard]] ConfigOverrides parseConfigText(const std::string& text,
                                              const std::string& source = "<config>");

/// Applies key/value pairs onto cfg. `origin` prefixes error messages ("line 3", "--dt").
void applyConfigValue(ScenarioConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& origin);

/// Reads either a key = value file or a summary JSON written by writeSummaryJson
/// (its manifest config is replayed).
[[nodiscard]] ScenarioConfig loadConfigFile(const std::filesystem::path& path);

/**
 * Layers defaults, the IMM_CDA_SEED value (if any), the config file (if any) and
 * flag overrides, in increasing precedence. Flag keys are config keys; errors
 * name them as "--key-with-dashes". Throws ParseError or ConfigError.
 */
[[nodiscard]] ScenarioConfig resolveConfig(const std::optional<std::filesystem::path>& file,
                                           const ConfigOverrides& flags,
                                           const char* env_seed = nullptr);

/// "--r-safe" for "r_safe".
[[nodiscard]] std::string flagName(const std::string& key);

/// Config echo in the same flat format parseConfigText reads.
[[nodiscard]] std::string formatConfig(const ScenarioConfig& cfg);

/// Shortest decimal that round-trips to the same double.
[[nodiscard]] std::string formatDouble(double v);

void writeEpisodeCsv(const EpisodeTrace& trace, const std::filesystem::path& path);
[[nodiscard]] std::string episodeCsv(const EpisodeTrace& trace);

/// One parsed CSV row; empty optional for blank cells.
struct CsvRow {
  std::map<std::string, std::optional<double>> values;
  [[nodiscard]] double at(const std::string& column) const;
};
[[nodiscard]] std::vector<CsvRow> readEpisodeCsv(const std::filesystem::path& path);
[[nodiscard]] std::vector<CsvRow> parseEpisodeCsv(const std::string& text);

struct RunManifest {
  ScenarioConfig config;
  std::string tool_version = kToolVersion;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  std::string timestamp;
};

[[nodiscard]] std::string summaryJson(const MonteCarloSummary& summary,
                                      const RunManifest& manifest);
void writeSummaryJson(const MonteCarloSummary& summary, const RunManifest& manifest,
                      const std::filesystem::path& path);

/// Numeric fields of a summary document, for round-trip checks and tooling.
struct SummaryDocument {
  RunManifest manifest;
  int n_episodes = 0;
  double min_sep_mean = 0.0;
  double min_sep_median = 0.0;
  double min_sep_stddev = 0.0;
  double breach_fraction = 0.0;
  double rmse_position_est = 0.0;
  double rmse_position_meas = 0.0;
  Vec2 rmse_est_axis = Vec2::Zero();
  Vec2 rmse_meas_axis = Vec2::Zero();
  Vec2 stddev_est_axis = Vec2::Zero();
  Vec2 stddev_meas_axis = Vec2::Zero();
  double mode_accuracy = 0.0;
};
[[nodiscard]] SummaryDocument parseSummaryJson(const std::string& text);
[[nodiscard]] SummaryDocument readSummaryJson(const std::filesystem::path& path);

}  // namespace immcda
