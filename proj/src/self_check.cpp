#include "immcda/self_check.hpp"

#include "immcda/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace immcda {

namespace {

using Check = std::function<std::string(const SelfCheckOptions&)>;

// Each check returns an empty string on success, else a failure description.
std::string fail(const std::string& what, double got, double limit) {
  std::ostringstream os;
  os << what << ": " << got << " (limit " << limit << ")";
  return os.str();
}

double relScale(double x) { return std::max(1.0, std::abs(x)); }

Mat3 randomStochastic(RandomStream& rng) {
  Mat3 pi;
  for (int i = 0; i < 3; ++i) {
    Vec3 row(rng.uniform() + 1e-3, rng.uniform() + 1e-3, rng.uniform() + 1e-3);
    row /= row.sum();
    row[2] = 1.0 - row[0] - row[1];
    pi.row(i) = row.transpose();
  }
  return pi;
}

Vec3 randomSimplex(RandomStream& rng) {
  Vec3 m(rng.uniform(), rng.uniform(), rng.uniform());
  m /= m.sum();
  return m;
}

std::string turnBlockOrthogonal(const SelfCheckOptions& o) {
  RandomStream rng(o.seed, RandomStream::kInitialConditions);
  double worst = 0.0;
  for (int n = 0; n < 2000; ++n) {
    const double scale = n % 2 == 0 ? 2.0 : 1e-6;
    const double omega = scale * (2.0 * rng.uniform() - 1.0);
    const double dt = 0.01 + 5.0 * rng.uniform();
    const Mat5 f = coordinatedTurnMatrix(omega, dt);
    Mat2 v;
    v << f(kVx1, kVx1), f(kVx1, kVx2), f(kVx2, kVx1), f(kVx2, kVx2);
    worst = std::max(worst, (v.transpose() * v - Mat2::Identity()).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(v.determinant() - 1.0));
  }
  return worst <= 1e-10 ? "" : fail("max orthogonality defect", worst, 1e-10);
}

std::string turnSeriesLimit(const SelfCheckOptions&) {
  double worst = 0.0;
  for (double dt : {0.1, 1.0, 5.0}) {
    Mat5 cv = Mat5::Identity();
    cv(kX1, kVx1) = dt;
    cv(kX2, kVx2) = dt;
    for (double omega : {0.0, 1e-12, -1e-12, 1e-9 / dt, -1e-9 / dt}) {
      worst = std::max(worst, (coordinatedTurnMatrix(omega, dt) - cv).cwiseAbs().maxCoeff());
    }
  }
  return worst <= 1e-8 ? "" : fail("max deviation from constant velocity", worst, 1e-8);
}

std::string samplingFrequencies(const SelfCheckOptions& o) {
  const TransitionMatrix pi = TransitionMatrix::nominal();
  RandomStream rng(o.seed, RandomStream::kModeSampling);
  double worst = 0.0;
  for (ModeId from : kAllModes) {
    Vec3 counts = Vec3::Zero();
    for (int n = 0; n < o.sampling_draws; ++n) {
      counts[modeIndex(sampleNextMode(from, pi, rng.uniform()))] += 1.0;
    }
    const Vec3 freq = counts / static_cast<double>(o.sampling_draws);
    worst = std::max(worst,
                     (freq - pi.matrix().row(modeIndex(from)).transpose()).cwiseAbs().maxCoeff());
  }
  return worst <= 0.01 ? "" : fail("max frequency error", worst, 0.01);
}

std::string propagationSimplex(const SelfCheckOptions& o) {
  RandomStream rng(o.seed, RandomStream::kProcessNoise);
  for (int n = 0; n < 1000; ++n) {
    const TransitionMatrix pi(randomStochastic(rng));
    Vec3 m = randomSimplex(rng);
    for (int k = 0; k < 20; ++k) {
      m = propagateModeProbabilities(pi, m);
      if (m.minCoeff() < 0.0) return "negative probability after propagation";
      if (std::abs(m.sum() - 1.0) > 1e-12) return fail("sum defect", std::abs(m.sum() - 1.0), 1e-12);
    }
  }
  return "";
}

std::string mixingColumnStochastic(const SelfCheckOptions& o) {
  RandomStream rng(o.seed, RandomStream::kMeasurementNoise);
  double worst = 0.0;
  for (int n = 0; n < 2000; ++n) {
    const TransitionMatrix pi(randomStochastic(rng));
    const MixingResult mix = mixingProbabilities(pi, randomSimplex(rng));
    for (int j = 0; j < kNumModes; ++j) {
      worst = std::max(worst, std::abs(mix.mu_ij.col(j).sum() - 1.0));
    }
  }
  return worst <= 1e-12 ? "" : fail("max column-sum defect", worst, 1e-12);
}

std::string immFuzz(const SelfCheckOptions& o) {
  RandomStream rng(o.seed + 17, RandomStream::kProcessNoise);
  const NoiseModel noise = NoiseModel::nominal();
  const Mat5 qf = covarianceFactor<5>(noise.process_cov);
  const Mat2 rf = covarianceFactor<2>(noise.meas_cov);
  constexpr int kChainLength = 50;
  int calls = 0;
  while (calls < o.fuzz_steps) {
    ImmModel model;
    model.pi = TransitionMatrix(randomStochastic(rng));
    ContinuousState truth{4000.0 * (2.0 * rng.uniform() - 1.0), 300.0 * (2.0 * rng.uniform() - 1.0),
                          4000.0 * (2.0 * rng.uniform() - 1.0), 300.0 * (2.0 * rng.uniform() - 1.0),
                          0.0};
    ModeId mode = ModeId::Straight;
    ImmBelief belief = initialBelief(measure(truth, rng.gaussian<2>(rf)));
    for (int k = 0; k < kChainLength && calls < o.fuzz_steps; ++k, ++calls) {
      mode = sampleNextMode(mode, model.pi, rng.uniform());
      Vec5 w = rng.gaussian<5>(qf);
      w[kOmega] = 0.0;
      truth = stepTruth(truth, mode, model.dt, w);
      const ImmStepOutput out = immStep(belief, measure(truth, rng.gaussian<2>(rf)), model);
      belief = out.belief;
      const Vec3& mu = belief.mu;
      if (mu.minCoeff() < 0.0 || std::abs(mu.sum() - 1.0) > 1e-12) {
        return "mode probabilities left the simplex at call " + std::to_string(calls);
      }
      if (!isSymmetricPsd(out.fused.cov)) return "fused covariance not PSD";
      for (int j = 0; j < kNumModes; ++j) {
        if (!isSymmetricPsd(belief.per_mode[j].cov)) {
          return "per-mode covariance not PSD at call " + std::to_string(calls);
        }
      }
      for (int c = 0; c < 5; ++c) {
        double lo = belief.per_mode[0].mean[c];
        double hi = lo;
        for (int j = 1; j < kNumModes; ++j) {
          lo = std::min(lo, belief.per_mode[j].mean[c]);
          hi = std::max(hi, belief.per_mode[j].mean[c]);
        }
        const double tol = 1e-12 * relScale(std::max(std::abs(lo), std::abs(hi)));
        if (out.fused.mean[c] < lo - tol || out.fused.mean[c] > hi + tol) {
          return "fused mean outside per-mode hull at call " + std::to_string(calls);
        }
      }
    }
  }
  return "";
}

std::string degenerateEquivalence(const SelfCheckOptions& o) {
  ScenarioConfig cfg;
  cfg.seed = o.seed;
  RandomStream init(o.seed, RandomStream::kInitialConditions);
  RandomStream rng(o.seed, RandomStream::kMeasurementNoise);
  const Mat2 rf = covarianceFactor<2>(cfg.meas_cov);
  ImmModel model = cfg.immModel();
  model.pi = TransitionMatrix::identity();
  double worst = 0.0;
  for (ModeId m : kAllModes) {
    ContinuousState truth = initScenario(cfg, init).truth;
    ImmBelief belief = initialBelief(measure(truth, rng.gaussian<2>(rf)));
    belief.mu = Vec3::Zero();
    belief.mu[modeIndex(m)] = 1.0;
    GaussianBelief kf = belief.per_mode[modeIndex(m)];
    for (int k = 0; k < 100; ++k) {
      truth = stepTruth(truth, ModeId::Straight, model.dt, Vec5::Zero());
      const Vec2 z = measure(truth, rng.gaussian<2>(rf));
      const ImmStepOutput out = immStep(belief, z, model);
      belief = out.belief;
      const Mat5 f = modeMatrix(m, kf.mean[kOmega], model.dt);
      kf = kfUpdate(kfPredict(kf, f, model.process_cov), z, model.meas_matrix, model.meas_cov).post;
      for (int c = 0; c < 5; ++c) {
        worst = std::max(worst, std::abs(out.fused.mean[c] - kf.mean[c]) / relScale(kf.mean[c]));
      }
      worst = std::max(worst, (out.fused.cov - kf.cov).cwiseAbs().maxCoeff() /
                                  relScale(kf.cov.cwiseAbs().maxCoeff()));
    }
  }
  return worst <= 1e-12 ? "" : fail("max relative deviation from single filter", worst, 1e-12);
}

std::string permutationEquivariance(const SelfCheckOptions& o) {
  RandomStream rng(o.seed + 5, RandomStream::kProcessNoise);
  const std::array<std::array<int, 3>, 5> perms = {
      {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    ImmModel model;
    model.pi = TransitionMatrix(randomStochastic(rng));
    // Mode-conditioned beliefs scattered around a common track, as after a few cycles.
    const Vec5 centre(3000.0 * rng.normal(), 200.0 * rng.normal(), 3000.0 * rng.normal(),
                      200.0 * rng.normal(), 0.05 * rng.normal());
    const Vec5 spread(40.0, 20.0, 40.0, 20.0, 0.05);
    ImmBelief belief;
    for (auto& g : belief.per_mode) {
      for (int c = 0; c < 5; ++c) g.mean[c] = centre[c] + spread[c] * rng.normal();
      Mat5 a;
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) a(r, c) = spread[r] * rng.normal();
      g.cov = a * a.transpose() / 5.0 + spread.cwiseProduct(spread).asDiagonal().toDenseMatrix();
    }
    belief.mu = randomSimplex(rng);
    const Vec2 z = Vec2(centre[kX1], centre[kX2]) + 50.0 * Vec2(rng.normal(), rng.normal());
    const auto transitions = modeTransitions(0.01, model.dt);
    const ImmStepOutput ref = immStep(belief, z, model, transitions);

    for (const auto& p : perms) {
      // slot s of the permuted bank holds original mode p[s]
      Mat3 pi_p;
      ImmBelief b_p;
      std::array<Mat5, kNumModes> f_p;
      for (int s = 0; s < 3; ++s) {
        for (int t = 0; t < 3; ++t) pi_p(s, t) = model.pi(p[s], p[t]);
        b_p.per_mode[s] = belief.per_mode[p[s]];
        b_p.mu[s] = belief.mu[p[s]];
        f_p[s] = transitions[p[s]];
      }
      ImmModel model_p = model;
      model_p.pi = TransitionMatrix(pi_p);
      const ImmStepOutput out = immStep(b_p, z, model_p, f_p);
      for (int s = 0; s < 3; ++s) worst = std::max(worst, std::abs(out.belief.mu[s] - ref.belief.mu[p[s]]));
      for (int c = 0; c < 5; ++c) {
        // relative to the summands, the fused value itself may be near zero
        double scale = 1.0;
        for (const auto& g : belief.per_mode) scale = std::max(scale, std::abs(g.mean[c]));
        worst = std::max(worst, std::abs(out.fused.mean[c] - ref.fused.mean[c]) / scale);
      }
      worst = std::max(worst, (out.fused.cov - ref.fused.cov).cwiseAbs().maxCoeff() /
                                  relScale(ref.fused.cov.cwiseAbs().maxCoeff()));
    }
  }
  return worst <= 1e-12 ? "" : fail("max relative deviation under relabelling", worst, 1e-12);
}

std::string likelihoodNormalised(const SelfCheckOptions&) {
  Mat2 s;
  s << 2500.0, 600.0, 600.0, 1600.0;
  const double h1 = std::sqrt(s(0, 0)) / 20.0;
  const double h2 = std::sqrt(s(1, 1)) / 20.0;
  double total = 0.0;
  for (int i = -200; i <= 200; ++i) {
    for (int j = -200; j <= 200; ++j) {
      total += gaussianLikelihood(Vec2(i * h1, j * h2), s) * h1 * h2;
    }
  }
  return std::abs(total - 1.0) <= 1e-3 ? "" : fail("integral", total, 1.0);
}

std::string tangency(const SelfCheckOptions& o) {
  RandomStream rng(o.seed, RandomStream::kInitialConditions);
  double worst = 0.0;
  for (int n = 0; n < o.tangency_trials; ++n) {
    const double r = 500.0 + 4500.0 * rng.uniform();
    const double br = r * (1.0 + 1e-3 + 2.0 * rng.uniform());
    const double ang = 2.0 * std::numbers::pi * rng.uniform();
    const Vec2 b = br * Vec2(std::cos(ang), std::sin(ang));
    const double heading = 2.0 * std::numbers::pi * rng.uniform();
    const Vec2 c = b + (50.0 + 1000.0 * rng.uniform()) * Vec2(std::cos(heading), std::sin(heading));
    const Advisory a = escapeAngle(b, c, r);
    if (std::abs(a.theta) > kMaxEscapeAngle) return "theta outside the clamp range";
    if (std::abs(a.theta_unclamped) <= kMaxEscapeAngle && a.theta != a.theta_unclamped) {
      return "in-range theta was altered by clamping";
    }
    const Vec2 dir = (rotation2d(-a.theta_unclamped) * (c - b)).normalized();
    const double dist = std::abs(b.x() * dir.y() - b.y() * dir.x());
    worst = std::max(worst, std::abs(dist - r) / r);
  }
  return worst <= 1e-6 ? "" : fail("max relative tangency error", worst, 1e-6);
}

std::string firstTrigger(const SelfCheckOptions& o) {
  RandomStream rng(o.seed, RandomStream::kModeSampling);
  for (int n = 0; n < 5000; ++n) {
    const Vec2 pos(5000.0 * (2.0 * rng.uniform() - 1.0), 5000.0 * (2.0 * rng.uniform() - 1.0));
    const Vec2 vel(1000.0 * (2.0 * rng.uniform() - 1.0), 1000.0 * (2.0 * rng.uniform() - 1.0));
    const auto hit = detectConflict(pos, vel, 1.0, 3000.0, 3);
    int expected = 0;
    for (int j = 1; j <= 3 && expected == 0; ++j) {
      if ((pos + j * vel).norm() < 3000.0) expected = j;
    }
    if ((hit ? hit->horizon_j : 0) != expected) return "trigger index differs from first unsafe j";
  }
  return "";
}

std::string rotateFrameInverse(const SelfCheckOptions& o) {
  RandomStream rng(o.seed, RandomStream::kMeasurementNoise);
  double worst = 0.0;
  for (int n = 0; n < 2000; ++n) {
    const ContinuousState s{1e4 * rng.normal(), 300.0 * rng.normal(), 1e4 * rng.normal(),
                            300.0 * rng.normal(), 0.1 * rng.normal()};
    const double theta = std::numbers::pi * (2.0 * rng.uniform() - 1.0);
    const Vec5 back = rotateFrame(rotateFrame(s, theta), -theta).vector();
    worst = std::max(worst, (back - s.vector()).cwiseAbs().maxCoeff() / relScale(s.vector().cwiseAbs().maxCoeff()));
  }
  return worst <= 1e-12 ? "" : fail("max relative round-trip error", worst, 1e-12);
}

std::string determinism(const SelfCheckOptions& o) {
  ScenarioConfig cfg;
  cfg.seed = o.seed;
  return episodeCsv(runEpisode(cfg)) == episodeCsv(runEpisode(cfg)) ? "" : "traces differ";
}

std::string closedFormTrajectory(const SelfCheckOptions& o) {
  ScenarioConfig cfg;
  cfg.seed = o.seed;
  cfg.noise_free_truth = true;
  cfg.pi = Mat3::Identity();
  cfg.cda_enabled = false;
  RandomStream init(cfg.seed, RandomStream::kInitialConditions);
  const ContinuousState x0 = initScenario(cfg, init).truth;
  const EpisodeTrace trace = runEpisode(cfg);
  double worst = 0.0;
  for (const auto& s : trace.steps) {
    const Vec2 expected = x0.position() + (s.k * cfg.dt) * x0.velocity();
    worst = std::max(worst, (s.truth.position() - expected).cwiseAbs().maxCoeff() /
                                relScale(expected.cwiseAbs().maxCoeff()));
  }
  return worst <= 1e-9 ? "" : fail("max relative deviation from the line", worst, 1e-9);
}

std::string modeAccuracy(const SelfCheckOptions& o) {
  ScenarioConfig cfg;
  cfg.seed = o.seed;
  cfg.cda_enabled = false;
  const double acc = runMonteCarlo(cfg, o.episodes).modeAccuracy();
  return acc >= 0.6 ? "" : fail("mode accuracy", acc, 0.6);
}

std::string avoidanceHelps(const SelfCheckOptions& o) {
  ScenarioConfig on;
  on.seed = o.seed;
  ScenarioConfig off = on;
  off.cda_enabled = false;
  const MonteCarloSummary a = runMonteCarlo(on, o.episodes);
  const MonteCarloSummary b = runMonteCarlo(off, o.episodes);
  if (!(a.breach_fraction < b.breach_fraction)) {
    return fail("breach fraction with avoidance", a.breach_fraction, b.breach_fraction);
  }
  if (!(a.min_sep_median > b.min_sep_median)) {
    return fail("median min separation with avoidance", a.min_sep_median, b.min_sep_median);
  }
  return "";
}

std::string csvRoundTrip(const SelfCheckOptions& o) {
  ScenarioConfig cfg;
  cfg.seed = o.seed;
  const EpisodeTrace trace = runEpisode(cfg);
  const auto rows = parseEpisodeCsv(episodeCsv(trace));
  if (rows.size() != trace.steps.size()) return "row count differs";
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * relScale(b); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& s = trace.steps[i];
    const Vec5 t = s.truth.vector();
    const Vec5& e = s.estimate.mean;
    const char* truth_cols[] = {"truth_x1", "truth_vx1", "truth_x2", "truth_vx2", "truth_omega"};
    const char* est_cols[] = {"est_x1", "est_vx1", "est_x2", "est_vx2", "est_omega"};
    for (int c = 0; c < 5; ++c) {
      if (!close(r.at(truth_cols[c]), t[c]) || !close(r.at(est_cols[c]), e[c])) {
        return "state column mismatch at row " + std::to_string(i);
      }
    }
    if (!close(r.at("z1"), s.z[0]) || !close(r.at("z2"), s.z[1]) ||
        !close(r.at("separation"), s.separation)) {
      return "measurement column mismatch at row " + std::to_string(i);
    }
    if (std::abs(r.at("mu1") + r.at("mu2") + r.at("mu3") - 1.0) > 1e-9) {
      return "mu row off the simplex at row " + std::to_string(i);
    }
    if (std::abs(r.at("separation") - std::hypot(r.at("truth_x1"), r.at("truth_x2"))) > 1e-6) {
      return "separation inconsistent with truth at row " + std::to_string(i);
    }
    if (s.advisory.has_value() != r.values.at("advisory_theta").has_value()) {
      return "advisory presence mismatch at row " + std::to_string(i);
    }
  }
  return "";
}

std::string jsonRoundTripAndReplay(const SelfCheckOptions& o) {
  ScenarioConfig cfg;
  cfg.seed = o.seed;
  cfg.dt = 0.75;
  cfg.steps = 40;
  cfg.r_safe = 2800.0;
  cfg.mode_threshold = 0.55;
  const MonteCarloSummary s = runMonteCarlo(cfg, 5);
  RunManifest m;
  m.config = cfg;
  m.seeds = s.seeds;
  m.timestamp = "1970-01-01T00:00:00Z";
  const SummaryDocument d = parseSummaryJson(summaryJson(s, m));
  if (!(d.manifest.config == cfg)) return "manifest config did not round-trip";
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * relScale(b); };
  if (d.n_episodes != s.n_episodes || !close(d.breach_fraction, s.breach_fraction) ||
      !close(d.min_sep_mean, s.min_sep_mean) || !close(d.min_sep_median, s.min_sep_median) ||
      !close(d.rmse_position_est, s.rmsePositionEst()) ||
      !close(d.rmse_position_meas, s.rmsePositionMeas()) ||
      !close(d.mode_accuracy, s.modeAccuracy())) {
    return "summary fields did not round-trip";
  }
  ScenarioConfig replay = d.manifest.config;
  replay.seed = d.manifest.seeds.front();
  ScenarioConfig original = cfg;
  original.seed = s.seeds.front();
  return episodeCsv(runEpisode(replay)) == episodeCsv(runEpisode(original))
             ? ""
             : "replayed trace differs";
}

struct NamedCheck {
  const char* module;
  const char* name;
  Check run;
};

}  // namespace

std::vector<CheckResult> runSelfChecks(const SelfCheckOptions& options) {
  const std::vector<NamedCheck> checks = {
      {"jump-markov-dynamics", "turn velocity block orthogonal", turnBlockOrthogonal},
      {"jump-markov-dynamics", "turn matrix series limit", turnSeriesLimit},
      {"jump-markov-dynamics", "mode sampling frequencies", samplingFrequencies},
      {"jump-markov-dynamics", "mode propagation simplex", propagationSimplex},
      {"imm-estimator", "mixing column-stochastic", mixingColumnStochastic},
      {"imm-estimator", "fuzzed cycle simplex/PSD/hull", immFuzz},
      {"imm-estimator", "degenerate bank equals single filter", degenerateEquivalence},
      {"imm-estimator", "permutation equivariance", permutationEquivariance},
      {"imm-estimator", "likelihood integrates to one", likelihoodNormalised},
      {"conflict-avoidance", "tangency and clamp", tangency},
      {"conflict-avoidance", "first-trigger rule", firstTrigger},
      {"conflict-avoidance", "rotate_frame inverse", rotateFrameInverse},
      {"conflict-avoidance", "avoidance lowers breaches", avoidanceHelps},
      {"scenario-sim", "determinism", determinism},
      {"scenario-sim", "noise-free straight trajectory", closedFormTrajectory},
      {"scenario-sim", "mode accuracy", modeAccuracy},
      {"trace-io-cli", "csv round trip", csvRoundTrip},
      {"trace-io-cli", "json round trip and manifest replay", jsonRoundTripAndReplay},
  };
  std::vector<CheckResult> results;
  for (const auto& c : checks) {
    CheckResult r{c.module, c.name, false, {}};
    try {
      r.detail = c.run(options);
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace immcda
