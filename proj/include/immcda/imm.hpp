#pragma once

#include "immcda/dynamics.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace immcda {

/// Raised when an innovation covariance is singular or badly conditioned.
class DegenerateMeasurementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GaussianBelief {
  Vec5 mean = Vec5::Zero();
  Mat5 cov = Mat5::Zero();
};

struct ImmBelief {
  std::array<GaussianBelief, kNumModes> per_mode;
  Vec3 mu = Vec3::Constant(1.0 / kNumModes);
};

struct Innovation {
  Vec2 residual = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
};

/// Everything the filter bank needs for one cycle.
struct ImmModel {
  TransitionMatrix pi = TransitionMatrix::nominal();
  Mat5 process_cov = NoiseModel::nominal().process_cov;
  Mat25 meas_matrix = NoiseModel::measurementMatrix();
  Mat2 meas_cov = NoiseModel::nominal().meas_cov;
  double dt = 1.0;
};

struct MixingResult {
  Mat3 mu_ij = Mat3::Zero();  // (i, j): Pr(mode i last step | mode j now)
  Vec3 c_bar = Vec3::Zero();  // predicted mode probabilities
  bool degenerate = false;    // some c_bar[j] was zero and its column was replaced
};

struct ImmStepOutput {
  ImmBelief belief;
  GaussianBelief fused;
  Vec3 likelihoods = Vec3::Zero();
  std::array<Innovation, kNumModes> innovations;
  bool mixing_degenerate = false;
  bool likelihood_underflow = false;
};

/// Step 1 of the cycle: mixing weights and predicted mode probabilities.
[[nodiscard]] MixingResult mixingProbabilities(const TransitionMatrix& pi, const Vec3& mu_prev);

/// Step 2: moment-matched mixed initial condition for each mode filter.
[[nodiscard]] std::array<GaussianBelief, kNumModes> mixInitialConditions(
    const std::array<GaussianBelief, kNumModes>& per_mode, const Mat3& mu_ij);

[[nodiscard]] GaussianBelief kfPredict(const GaussianBelief& prior, const Mat5& transition,
                                       const Mat5& process_cov);

struct KfUpdateResult {
  GaussianBelief post;
  Innovation innovation;
};

/// Joseph-form measurement update. Throws DegenerateMeasurementError when the
/// innovation covariance is not positive definite or its condition number exceeds 1e12.
[[nodiscard]] KfUpdateResult kfUpdate(const GaussianBelief& pred, const Vec2& z, const Mat25& h,
                                      const Mat2& r);

/// Bivariate normal density of the residual under covariance s.
[[nodiscard]] double gaussianLikelihood(const Vec2& residual, const Mat2& s);

struct ModeProbabilityUpdate {
  Vec3 mu = Vec3::Zero();
  bool underflow = false;  // every product vanished; mu fell back to c_bar
};

/// Step 4: posterior mode probabilities from likelihoods and the predicted probabilities.
[[nodiscard]] ModeProbabilityUpdate updateModeProbabilities(const Vec3& likelihoods,
                                                            const Vec3& c_bar);

/// Moment-matched single Gaussian of the mode-conditioned mixture.
[[nodiscard]] GaussianBelief fuseEstimates(const std::array<GaussianBelief, kNumModes>& per_mode,
                                           const Vec3& mu);

/// One full IMM cycle against measurement z. Per-mode transition matrices are
/// rebuilt from the fused turn-rate estimate of the incoming belief.
[[nodiscard]] ImmStepOutput immStep(const ImmBelief& belief, const Vec2& z, const ImmModel& model);

/// Same cycle with caller-supplied per-filter transition matrices.
[[nodiscard]] ImmStepOutput immStep(const ImmBelief& belief, const Vec2& z, const ImmModel& model,
                                    const std::array<Mat5, kNumModes>& transitions);

/// Transition matrices of the three mode filters for a given base turn rate.
[[nodiscard]] std::array<Mat5, kNumModes> modeTransitions(double base_rate, double dt);

/// Uninformative start anchored on the first position fix.
[[nodiscard]] ImmBelief initialBelief(const Vec2& first_measurement);

/// Index of the largest mode probability (ties resolve to the lowest index).
[[nodiscard]] ModeId mostLikelyMode(const Vec3& mu);

/// Projection onto the symmetric part; keeps covariances exactly symmetric after products.
[[nodiscard]] inline Mat5 symmetrized(const Mat5& m) { return 0.5 * (m + m.transpose()); }

}  // namespace immcda
