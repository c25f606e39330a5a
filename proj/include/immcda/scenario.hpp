#pragma once

#include "immcda/conflict.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace immcda {

/// Invalid configuration value; key() names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ScenarioConfig {
  double dt = 1.0;
  int steps = 60;
  double v_cruise = 285.841;
  double r_safe = 3000.0;
  double spawn_radius = 4500.0;
  Mat3 pi = TransitionMatrix::nominal().matrix();
  Mat5 process_cov = NoiseModel::nominal().process_cov;
  Mat2 meas_cov = NoiseModel::nominal().meas_cov;
  bool cda_enabled = true;
  std::uint64_t seed = 1;
  int lookahead_max = 3;
  // Estimated mode holds its previous value while max(mu) is below this. 0 disables.
  double mode_threshold = 0.0;
  // Steps 1..burn_in-1 are excluded from mode accuracy.
  int metric_burn_in = 5;
  // Truth and measurements without noise; the filters keep the configured covariances.
  bool noise_free_truth = false;
  // Intruder keeps straight flight while its track still enters the protected disc.
  bool intruder_approach_straight = true;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  [[nodiscard]] ImmModel immModel() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/**
 * Seedable generator with independent substreams.
 *
 * Each stream is a std::mt19937_64 seeded from seed_seq{seed low word, seed high
 * word, stream id}; uniforms take the top 53 bits, normals use Box-Muller on
 * two uniforms. Every step draws the same number of variates whether or not
 * avoidance is active, so runs with and without it see identical noise.
 */
class RandomStream {
 public:
  enum Id : std::uint32_t { kInitialConditions = 0, kModeSampling = 1, kProcessNoise = 2,
                            kMeasurementNoise = 3 };

  RandomStream(std::uint64_t seed, Id stream);

  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// Zero-mean draw with covariance sqrt_cov * sqrt_cov^T.
  template <int N>
  Eigen::Matrix<double, N, 1> gaussian(const Eigen::Matrix<double, N, N>& sqrt_cov) {
    Eigen::Matrix<double, N, 1> n;
    for (int i = 0; i < N; ++i) n[i] = normal();
    return sqrt_cov * n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Symmetric square root factor L with L L^T = cov, valid for singular PSD input.
template <int N>
[[nodiscard]] Eigen::Matrix<double, N, N> covarianceFactor(const Eigen::Matrix<double, N, N>& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(cov);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct InitialCondition {
  ContinuousState truth;
  ModeId mode = ModeId::Straight;
};

/// Spawn on the circle of radius spawn_radius, speed in [v_cruise, 2 v_cruise],
/// heading toward a uniform point of the r_safe disc whose straight-line track
/// enters the disc at one of the sampled steps.
[[nodiscard]] InitialCondition initScenario(const ScenarioConfig& config, RandomStream& rng);

struct EpisodeStep {
  int k = 0;
  double t = 0.0;
  ContinuousState truth;
  ModeId true_mode = ModeId::Straight;
  Vec2 z = Vec2::Zero();
  GaussianBelief estimate;
  Vec3 mu = Vec3::Zero();
  ModeId est_mode = ModeId::Straight;
  std::vector<ConflictPrediction> predictions;
  std::optional<Advisory> advisory;
  double separation = 0.0;
  bool likelihood_underflow = false;
  bool mixing_degenerate = false;
};

/// Streaming position-error statistics, per axis.
struct ErrorStats {
  long count = 0;
  Vec2 sum = Vec2::Zero();
  Vec2 sum_sq = Vec2::Zero();

  void add(const Vec2& err);
  void merge(const ErrorStats& other);
  [[nodiscard]] Vec2 rmseAxis() const;
  [[nodiscard]] Vec2 stddevAxis() const;
  /// sqrt(mean(e1^2 + e2^2)).
  [[nodiscard]] double rmseCombined() const;
};

struct EpisodeSummary {
  std::uint64_t seed = 0;
  double min_separation = 0.0;
  int breach_steps = 0;
  bool breached = false;
  int advisories = 0;
  int interior_breaches = 0;
  ErrorStats est_error;
  ErrorStats meas_error;
  long mode_correct = 0;
  long mode_total = 0;

  [[nodiscard]] double modeAccuracy() const;
};

struct EpisodeTrace {
  ScenarioConfig config;
  std::vector<EpisodeStep> steps;
  EpisodeSummary summary;
};

/// Closed loop: mode draw, truth step, measurement, IMM cycle, then detection and
/// escape. Deterministic in the config (seed included).
[[nodiscard]] EpisodeTrace runEpisode(const ScenarioConfig& config);

[[nodiscard]] EpisodeSummary summarizeEpisode(const ScenarioConfig& config,
                                              const std::vector<EpisodeStep>& steps);

struct MonteCarloSummary {
  int n_episodes = 0;
  std::vector<std::uint64_t> seeds;
  double min_sep_mean = 0.0;
  double min_sep_median = 0.0;
  double min_sep_stddev = 0.0;
  double breach_fraction = 0.0;
  ErrorStats est_error;
  ErrorStats meas_error;
  long mode_correct = 0;
  long mode_total = 0;
  int advisories = 0;
  int interior_breaches = 0;

  [[nodiscard]] double modeAccuracy() const;
  [[nodiscard]] double rmsePositionEst() const { return est_error.rmseCombined(); }
  [[nodiscard]] double rmsePositionMeas() const { return meas_error.rmseCombined(); }
};

[[nodiscard]] MonteCarloSummary aggregate(const std::vector<EpisodeSummary>& episodes);

/// Episodes with seeds config.seed + 0 .. n-1. on_trace, when set, sees every trace.
[[nodiscard]] MonteCarloSummary runMonteCarlo(
    const ScenarioConfig& config, int n_episodes,
    const std::function<void(const EpisodeTrace&)>& on_trace = {});

}  // namespace immcda
