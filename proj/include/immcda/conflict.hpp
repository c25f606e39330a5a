#pragma once

#include "immcda/imm.hpp"

#include <optional>

namespace immcda {

/// Largest frame rotation commanded in one step (rad).
inline constexpr double kMaxEscapeAngle = 0.78539816339744830962;

struct ConflictPrediction {
  int horizon_j = 0;
  Vec2 predicted_point = Vec2::Zero();
  double predicted_range = 0.0;
  bool unsafe = false;
};

/**
 * Escape manoeuvre for one step.
 *
 * Angles follow the frame-rotation convention: a positive theta is a
 * counterclockwise turn of the reference aircraft, so relative tracks swing
 * clockwise by theta. gamma is the signed angle from the predicted track b->c
 * to the line of sight b->O, and beta the half-angle of the tangent cone from b.
 */
struct Advisory {
  double theta = 0.0;
  double theta_unclamped = 0.0;
  int trigger_j = 0;
  double beta = 0.0;
  double gamma = 0.0;
  bool interior_breach = false;  // b already inside r_safe; no tangent exists
};

/// Straight-line extrapolation position + j * step_delta and its range against r_safe.
[[nodiscard]] ConflictPrediction predictRange(const Vec2& position, const Vec2& step_delta, int j,
                                              double r_safe);

/// Scans j = 1..lookahead_max and returns the first unsafe prediction, if any.
[[nodiscard]] std::optional<ConflictPrediction> detectConflict(const Vec2& est_position,
                                                               const Vec2& est_velocity, double dt,
                                                               double r_safe,
                                                               int lookahead_max = 3);

/// Tangent-geometry escape angle for the track from b through the unsafe point c.
/// Throws std::invalid_argument if c == b or r_safe <= 0.
[[nodiscard]] Advisory escapeAngle(const Vec2& b, const Vec2& c, double r_safe);

/// Rotation matrix for a counterclockwise angle.
[[nodiscard]] Mat2 rotation2d(double angle);

/// Re-expresses a relative state in the reference frame after the reference
/// turns by theta: position and velocity both rotate by -theta.
[[nodiscard]] ContinuousState rotateFrame(const ContinuousState& state, double theta);

/// Relative-track effect of an escape manoeuvre: the relative velocity swings
/// by -theta about the tracked aircraft's current position, position unchanged.
[[nodiscard]] ContinuousState redirectTrack(const ContinuousState& state, double theta);

/// 5x5 orthogonal map acting as rotateFrame on a state vector.
[[nodiscard]] Mat5 frameRotationMatrix(double theta);

/// 5x5 orthogonal map acting as redirectTrack on a state vector.
[[nodiscard]] Mat5 trackRedirectMatrix(double theta);

/// Applies the manoeuvre to every mode-conditioned belief; mu is untouched.
[[nodiscard]] ImmBelief applyAvoidance(const ImmBelief& belief, const Advisory& advisory);

}  // namespace immcda
