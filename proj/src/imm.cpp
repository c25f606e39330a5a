#include "immcda/imm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace immcda {

MixingResult mixingProbabilities(const TransitionMatrix& pi, const Vec3& mu_prev) {
  MixingResult out;
  out.c_bar = pi.matrix().transpose() * mu_prev;
  for (int j = 0; j < kNumModes; ++j) {
    if (out.c_bar[j] > 0.0) {
      for (int i = 0; i < kNumModes; ++i) {
        out.mu_ij(i, j) = pi(i, j) * mu_prev[i] / out.c_bar[j];
      }
    } else {
      out.mu_ij.col(j).setConstant(1.0 / kNumModes);
      out.degenerate = true;
    }
  }
  return out;
}

namespace {

// Shared by mixing and fusion: moment match sum_i w_i N(mean_i, cov_i).
GaussianBelief momentMatch(const std::array<GaussianBelief, kNumModes>& parts,
                           const Eigen::Ref<const Vec3>& weights) {
  GaussianBelief out;
  for (int i = 0; i < kNumModes; ++i) out.mean += weights[i] * parts[i].mean;
  for (int i = 0; i < kNumModes; ++i) {
    const Vec5 d = parts[i].mean - out.mean;
    out.cov += weights[i] * (parts[i].cov + d * d.transpose());
  }
  out.cov = symmetrized(out.cov);
  return out;
}

}  // namespace

std::array<GaussianBelief, kNumModes> mixInitialConditions(
    const std::array<GaussianBelief, kNumModes>& per_mode, const Mat3& mu_ij) {
  std::array<GaussianBelief, kNumModes> mixed;
  for (int j = 0; j < kNumModes; ++j) mixed[j] = momentMatch(per_mode, mu_ij.col(j));
  return mixed;
}

GaussianBelief kfPredict(const GaussianBelief& prior, const Mat5& transition,
                         const Mat5& process_cov) {
  GaussianBelief out;
  out.mean = transition * prior.mean;
  out.cov = symmetrized(transition * prior.cov * transition.transpose() + process_cov);
  return out;
}

namespace {

constexpr double kMaxInnovationCondition = 1e12;

void requireWellConditioned(const Mat2& s) {
  if (!s.allFinite()) throw DegenerateMeasurementError("innovation covariance is not finite");
  Eigen::SelfAdjointEigenSolver<Mat2> es(s, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()[0];
  const double hi = es.eigenvalues()[1];
  if (!(lo > 0.0)) {
    throw DegenerateMeasurementError("innovation covariance is not positive definite");
  }
  if (hi / lo > kMaxInnovationCondition) {
    throw DegenerateMeasurementError("innovation covariance condition number " +
                                     std::to_string(hi / lo) + " exceeds 1e12");
  }
}

}  // namespace

KfUpdateResult kfUpdate(const GaussianBelief& pred, const Vec2& z, const Mat25& h, const Mat2& r) {
  KfUpdateResult out;
  out.innovation.residual = z - h * pred.mean;
  out.innovation.cov = h * pred.cov * h.transpose() + r;
  out.innovation.cov = 0.5 * (out.innovation.cov + out.innovation.cov.transpose()).eval();
  requireWellConditioned(out.innovation.cov);

  const Eigen::Matrix<double, 5, 2> gain =
      pred.cov * h.transpose() * out.innovation.cov.inverse();
  const Mat5 i_kh = Mat5::Identity() - gain * h;
  out.post.mean = pred.mean + gain * out.innovation.residual;
  out.post.cov =
      symmetrized(i_kh * pred.cov * i_kh.transpose() + gain * r * gain.transpose());
  return out;
}

double gaussianLikelihood(const Vec2& residual, const Mat2& s) {
  const Eigen::LLT<Mat2> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) {
    throw DegenerateMeasurementError("likelihood covariance is not positive definite");
  }
  const Vec2 w = llt.matrixL().solve(residual);
  const double sqrt_det = llt.matrixL()(0, 0) * llt.matrixL()(1, 1);
  return std::exp(-0.5 * w.squaredNorm()) / (2.0 * std::numbers::pi * sqrt_det);
}

ModeProbabilityUpdate updateModeProbabilities(const Vec3& likelihoods, const Vec3& c_bar) {
  ModeProbabilityUpdate out;
  const Vec3 weighted = likelihoods.cwiseProduct(c_bar);
  const double total = weighted.sum();
  if (!(total > std::numeric_limits<double>::min()) || !std::isfinite(total)) {
    out.mu = c_bar;
    out.underflow = true;
    return out;
  }
  out.mu = weighted / total;
  return out;
}

GaussianBelief fuseEstimates(const std::array<GaussianBelief, kNumModes>& per_mode,
                             const Vec3& mu) {
  return momentMatch(per_mode, mu);
}

std::array<Mat5, kNumModes> modeTransitions(double base_rate, double dt) {
  std::array<Mat5, kNumModes> f;
  for (int j = 0; j < kNumModes; ++j) f[j] = modeMatrix(modeFromIndex(j), base_rate, dt);
  return f;
}

ImmStepOutput immStep(const ImmBelief& belief, const Vec2& z, const ImmModel& model) {
  const double base_rate = fuseEstimates(belief.per_mode, belief.mu).mean[kOmega];
  return immStep(belief, z, model, modeTransitions(base_rate, model.dt));
}

ImmStepOutput immStep(const ImmBelief& belief, const Vec2& z, const ImmModel& model,
                      const std::array<Mat5, kNumModes>& transitions) {
  ImmStepOutput out;
  const MixingResult mixing = mixingProbabilities(model.pi, belief.mu);
  out.mixing_degenerate = mixing.degenerate;
  const auto mixed = mixInitialConditions(belief.per_mode, mixing.mu_ij);

  for (int j = 0; j < kNumModes; ++j) {
    const GaussianBelief pred = kfPredict(mixed[j], transitions[j], model.process_cov);
    const KfUpdateResult upd = kfUpdate(pred, z, model.meas_matrix, model.meas_cov);
    out.belief.per_mode[j] = upd.post;
    out.innovations[j] = upd.innovation;
    out.likelihoods[j] = gaussianLikelihood(upd.innovation.residual, upd.innovation.cov);
  }

  const ModeProbabilityUpdate mode_update = updateModeProbabilities(out.likelihoods, mixing.c_bar);
  out.belief.mu = mode_update.mu;
  out.likelihood_underflow = mode_update.underflow;
  out.fused = fuseEstimates(out.belief.per_mode, out.belief.mu);
  return out;
}

ImmBelief initialBelief(const Vec2& first_measurement) {
  GaussianBelief start;
  start.mean << first_measurement[0], 0.0, first_measurement[1], 0.0, 0.0;
  start.cov = Vec5(100.0 * 100.0, 400.0 * 400.0, 100.0 * 100.0, 400.0 * 400.0, 0.01).asDiagonal();
  ImmBelief b;
  b.per_mode.fill(start);
  b.mu = Vec3::Constant(1.0 / kNumModes);
  return b;
}

ModeId mostLikelyMode(const Vec3& mu) {
  int best = 0;
  for (int j = 1; j < kNumModes; ++j) {
    if (mu[j] > mu[best]) best = j;
  }
  return modeFromIndex(best);
}

}  // namespace immcda
