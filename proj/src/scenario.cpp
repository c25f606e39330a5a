#include "immcda/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace immcda {

void ScenarioConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be > 0");
  if (steps < 1) throw ConfigError("steps", "must be >= 1");
  if (!(v_cruise > 0.0) || !std::isfinite(v_cruise)) {
    throw ConfigError("v_cruise", "must be > 0");
  }
  if (!(r_safe > 0.0) || !std::isfinite(r_safe)) throw ConfigError("r_safe", "must be > 0");
  if (!(spawn_radius > r_safe) || !std::isfinite(spawn_radius)) {
    throw ConfigError("spawn_radius", "must exceed r_safe");
  }
  if (auto err = TransitionMatrix::validate(pi); !err.empty()) throw ConfigError("pi", err);
  if (!isSymmetricPsd(process_cov)) {
    throw ConfigError("process_cov", "must be symmetric positive semidefinite");
  }
  if (!isSymmetricPsd(meas_cov)) {
    throw ConfigError("meas_cov", "must be symmetric positive semidefinite");
  }
  if (lookahead_max < 1) throw ConfigError("lookahead_max", "must be >= 1");
  if (!(mode_threshold >= 0.0 && mode_threshold <= 1.0)) {
    throw ConfigError("mode_threshold", "must lie in [0, 1]");
  }
  if (metric_burn_in < 0) throw ConfigError("metric_burn_in", "must be >= 0");
}

ImmModel ScenarioConfig::immModel() const {
  ImmModel m;
  m.pi = TransitionMatrix(pi);
  m.process_cov = process_cov;
  m.meas_matrix = NoiseModel::measurementMatrix();
  m.meas_cov = meas_cov;
  m.dt = dt;
  return m;
}

RandomStream::RandomStream(std::uint64_t seed, Id stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(stream)};
  engine_.seed(seq);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

bool straightLineBreaches(const Vec2& p0, const Vec2& v, const ScenarioConfig& config) {
  for (int k = 1; k <= config.steps; ++k) {
    if ((p0 + (k * config.dt) * v).norm() < config.r_safe) return true;
  }
  return false;
}

// Outside the disc and the straight-line track still enters it.
bool onCollisionCourse(const ContinuousState& s, const ScenarioConfig& config) {
  const Vec2 p = s.position();
  const Vec2 v = s.velocity();
  if (p.norm() < config.r_safe) return false;
  const double vv = v.squaredNorm();
  if (vv == 0.0) return false;
  const double t_cpa = -p.dot(v) / vv;
  if (t_cpa <= 0.0) return false;
  return (p + t_cpa * v).norm() < config.r_safe;
}

}  // namespace

InitialCondition initScenario(const ScenarioConfig& config, RandomStream& rng) {
  constexpr int kMaxAimAttempts = 64;
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const Vec2 position = config.spawn_radius * Vec2(std::cos(phi), std::sin(phi));
  const double speed = config.v_cruise * (1.0 + rng.uniform());

  Vec2 velocity = -position.normalized() * speed;
  for (int attempt = 0; attempt < kMaxAimAttempts; ++attempt) {
    const double radius = config.r_safe * std::sqrt(rng.uniform());
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const Vec2 aim = radius * Vec2(std::cos(angle), std::sin(angle));
    const Vec2 candidate = (aim - position).normalized() * speed;
    if (straightLineBreaches(position, candidate, config)) {
      velocity = candidate;
      break;
    }
  }

  InitialCondition ic;
  ic.truth = {position.x(), velocity.x(), position.y(), velocity.y(), 0.0};
  ic.mode = ModeId::Straight;
  return ic;
}

void ErrorStats::add(const Vec2& err) {
  ++count;
  sum += err;
  sum_sq += err.cwiseProduct(err);
}

void ErrorStats::merge(const ErrorStats& other) {
  count += other.count;
  sum += other.sum;
  sum_sq += other.sum_sq;
}

Vec2 ErrorStats::rmseAxis() const {
  if (count == 0) return Vec2::Zero();
  return (sum_sq / static_cast<double>(count)).cwiseSqrt();
}

Vec2 ErrorStats::stddevAxis() const {
  if (count == 0) return Vec2::Zero();
  const double n = static_cast<double>(count);
  const Vec2 mean = sum / n;
  return (sum_sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
}

double ErrorStats::rmseCombined() const {
  if (count == 0) return 0.0;
  return std::sqrt(sum_sq.sum() / static_cast<double>(count));
}

double EpisodeSummary::modeAccuracy() const {
  return mode_total == 0 ? 0.0 : static_cast<double>(mode_correct) / mode_total;
}

double MonteCarloSummary::modeAccuracy() const {
  return mode_total == 0 ? 0.0 : static_cast<double>(mode_correct) / mode_total;
}

EpisodeSummary summarizeEpisode(const ScenarioConfig& config,
                                const std::vector<EpisodeStep>& steps) {
  EpisodeSummary s;
  s.seed = config.seed;
  s.min_separation = std::numeric_limits<double>::infinity();
  for (const auto& step : steps) {
    s.min_separation = std::min(s.min_separation, step.separation);
    if (step.separation < config.r_safe) ++s.breach_steps;
    if (step.advisory) {
      ++s.advisories;
      if (step.advisory->interior_breach) ++s.interior_breaches;
    }
    const Vec2 truth_pos = step.truth.position();
    s.est_error.add(Vec2(step.estimate.mean[kX1], step.estimate.mean[kX2]) - truth_pos);
    s.meas_error.add(step.z - truth_pos);
    if (step.k >= config.metric_burn_in) {
      ++s.mode_total;
      if (step.est_mode == step.true_mode) ++s.mode_correct;
    }
  }
  s.breached = s.min_separation < config.r_safe;
  return s;
}

EpisodeTrace runEpisode(const ScenarioConfig& config) {
  config.validate();
  const ImmModel model = config.immModel();

  RandomStream init_rng(config.seed, RandomStream::kInitialConditions);
  RandomStream mode_rng(config.seed, RandomStream::kModeSampling);
  RandomStream process_rng(config.seed, RandomStream::kProcessNoise);
  RandomStream meas_rng(config.seed, RandomStream::kMeasurementNoise);

  const Mat5 process_factor = covarianceFactor<5>(config.process_cov);
  const Mat2 meas_factor = covarianceFactor<2>(config.meas_cov);
  const double noise_gain = config.noise_free_truth ? 0.0 : 1.0;

  auto [truth, mode] = initScenario(config, init_rng);
  ImmBelief belief = initialBelief(measure(truth, noise_gain * meas_rng.gaussian<2>(meas_factor)));

  EpisodeTrace trace;
  trace.config = config;
  trace.steps.reserve(static_cast<std::size_t>(config.steps));

  bool manoeuvring = false;
  bool approaching = config.intruder_approach_straight;
  ModeId reported_mode = ModeId::Straight;
  for (int k = 1; k <= config.steps; ++k) {
    // Drawn every step so runs with and without avoidance stay noise-paired.
    const double u = mode_rng.uniform();
    // Straight flight on the initial collision course and across a manoeuvre step.
    if (approaching && !onCollisionCourse(truth, config)) approaching = false;
    if (approaching || manoeuvring) {
      mode = ModeId::Straight;
    } else if (k > 1) {
      mode = sampleNextMode(mode, model.pi, u);
    }
    manoeuvring = false;

    Vec5 w = noise_gain * process_rng.gaussian<5>(process_factor);
    w[kOmega] = 0.0;  // the turn-rate channel is not driven in the truth model
    truth = stepTruth(truth, mode, config.dt, w);
    const Vec2 z = measure(truth, noise_gain * meas_rng.gaussian<2>(meas_factor));

    ImmStepOutput out;
    try {
      out = immStep(belief, z, model);
    } catch (const DegenerateMeasurementError& e) {
      throw DegenerateMeasurementError("imm-estimator at step " + std::to_string(k) + ": " +
                                       e.what());
    }
    belief = out.belief;

    EpisodeStep rec;
    rec.k = k;
    rec.t = k * config.dt;
    rec.true_mode = mode;
    rec.z = z;
    rec.estimate = out.fused;
    rec.mu = out.belief.mu;
    rec.likelihood_underflow = out.likelihood_underflow;
    rec.mixing_degenerate = out.mixing_degenerate;
    if (config.mode_threshold <= 0.0 || out.belief.mu.maxCoeff() >= config.mode_threshold) {
      reported_mode = mostLikelyMode(out.belief.mu);
    }
    rec.est_mode = reported_mode;

    if (config.cda_enabled) {
      const Vec2 est_pos(out.fused.mean[kX1], out.fused.mean[kX2]);
      const Vec2 est_vel(out.fused.mean[kVx1], out.fused.mean[kVx2]);
      const Vec2 delta = est_vel * config.dt;
      for (int j = 1; j <= config.lookahead_max; ++j) {
        rec.predictions.push_back(predictRange(est_pos, delta, j, config.r_safe));
        if (rec.predictions.back().unsafe) break;
      }
      const auto& last = rec.predictions.back();
      if (last.unsafe && delta.squaredNorm() > 0.0) {
        const Advisory adv = escapeAngle(est_pos, last.predicted_point, config.r_safe);
        rec.advisory = adv;
        rec.advisory->trigger_j = last.horizon_j;
        truth = redirectTrack(truth, adv.theta);
        belief = applyAvoidance(belief, adv);
        manoeuvring = true;
      }
    }

    rec.truth = truth;
    rec.separation = truth.range();
    trace.steps.push_back(std::move(rec));
  }

  trace.summary = summarizeEpisode(config, trace.steps);
  return trace;
}

MonteCarloSummary aggregate(const std::vector<EpisodeSummary>& episodes) {
  MonteCarloSummary s;
  s.n_episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) return s;

  std::vector<double> min_seps;
  int breached = 0;
  for (const auto& e : episodes) {
    s.seeds.push_back(e.seed);
    min_seps.push_back(e.min_separation);
    breached += e.breached ? 1 : 0;
    s.est_error.merge(e.est_error);
    s.meas_error.merge(e.meas_error);
    s.mode_correct += e.mode_correct;
    s.mode_total += e.mode_total;
    s.advisories += e.advisories;
    s.interior_breaches += e.interior_breaches;
  }

  const double n = static_cast<double>(min_seps.size());
  s.min_sep_mean = std::accumulate(min_seps.begin(), min_seps.end(), 0.0) / n;
  double var = 0.0;
  for (double m : min_seps) var += (m - s.min_sep_mean) * (m - s.min_sep_mean);
  s.min_sep_stddev = std::sqrt(var / n);

  std::vector<double> sorted = min_seps;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.min_sep_median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.breach_fraction = breached / n;
  return s;
}

MonteCarloSummary runMonteCarlo(const ScenarioConfig& config, int n_episodes,
                                const std::function<void(const EpisodeTrace&)>& on_trace) {
  if (n_episodes < 1) throw ConfigError("episodes", "must be >= 1");
  std::vector<EpisodeSummary> summaries;
  summaries.reserve(static_cast<std::size_t>(n_episodes));
  for (int i = 0; i < n_episodes; ++i) {
    ScenarioConfig episode_config = config;
    episode_config.seed = config.seed + static_cast<std::uint64_t>(i);
    EpisodeTrace trace = runEpisode(episode_config);
    if (on_trace) on_trace(trace);
    summaries.push_back(trace.summary);
  }
  return aggregate(summaries);
}

}  // namespace immcda
