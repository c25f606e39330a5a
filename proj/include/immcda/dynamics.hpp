#pragma once

#include "immcda/types.hpp"

namespace immcda {

/// Row-stochastic Markov transition matrix, entry (i, j) = Pr(next = j | current = i).
class TransitionMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  /// Throws std::invalid_argument if any entry leaves [0, 1] or a row does not sum to one.
  explicit TransitionMatrix(const Mat3& pi);

  /// The three-mode chain used by the default scenario: sticky modes, turns
  /// relax back to straight flight more readily than they reverse.
  [[nodiscard]] static TransitionMatrix nominal();
  [[nodiscard]] static TransitionMatrix identity() { return TransitionMatrix(Mat3::Identity()); }

  [[nodiscard]] const Mat3& matrix() const { return pi_; }
  [[nodiscard]] double operator()(int from, int to) const { return pi_(from, to); }

  /// Empty string when valid, else a description of the first violation.
  [[nodiscard]] static std::string validate(const Mat3& pi);

 private:
  Mat3 pi_;
};

/// Process and measurement noise for the position-only sensor.
struct NoiseModel {
  Mat5 process_cov;
  Mat2 meas_cov;

  [[nodiscard]] static NoiseModel nominal();
  /// Selector picking (x1, x2) out of the state.
  [[nodiscard]] static Mat25 measurementMatrix();
};

/// Symmetric with a nonnegative spectrum, up to a tolerance scaled by the trace.
[[nodiscard]] bool isSymmetricPsd(const Eigen::Ref<const Eigen::MatrixXd>& m, double rel_tol = 1e-9);

/**
 * Constant-turn-rate transition over one step of length dt.
 *
 * The velocity pair (vx1, vx2) is rotated counterclockwise by omega * dt; the
 * position pair integrates the rotating velocity exactly. The turn-rate row and
 * column are identity. For |omega * dt| below a small threshold the sin/cos
 * quotients are evaluated from their Taylor series so that omega = 0 gives the
 * constant-velocity matrix exactly.
 */
[[nodiscard]] Mat5 coordinatedTurnMatrix(double omega_eff, double dt);

/// Per-mode transition: straight is constant velocity, left/right turn at base_rate +/- pi/4.
[[nodiscard]] Mat5 modeMatrix(ModeId mode, double base_rate, double dt);

/// Turn-rate offset applied by the turning modes (rad/s).
inline constexpr double kTurnRateOffset = 0.78539816339744830962;

/// Signed turn rate used by a mode with the given base rate.
[[nodiscard]] double modeTurnRate(ModeId mode, double base_rate);

/// Acceleration-to-state map. Only documents the noise pathway: the simulator
/// and the filters use the full 5x5 process covariance directly.
[[nodiscard]] Mat53 noiseInputMatrix(double dt);

/// One step of the hybrid plant with externally drawn state-space noise.
[[nodiscard]] ContinuousState stepTruth(const ContinuousState& state, ModeId mode, double dt,
                                        const Vec5& process_noise);

/// Inverse-CDF draw from row `mode` of pi with a caller-supplied uniform u in [0, 1).
[[nodiscard]] ModeId sampleNextMode(ModeId mode, const TransitionMatrix& pi, double u);

/// Unvalidated overload; throws std::invalid_argument if the row is not stochastic.
[[nodiscard]] ModeId sampleNextMode(ModeId mode, const Mat3& pi, double u);

/// Position measurement with additive noise.
[[nodiscard]] Vec2 measure(const ContinuousState& state, const Vec2& meas_noise);

/// One step of the mode-probability recursion, m(k+1) = pi^T m(k).
[[nodiscard]] Vec3 propagateModeProbabilities(const TransitionMatrix& pi, const Vec3& m);

}  // namespace immcda
