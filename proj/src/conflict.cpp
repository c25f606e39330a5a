#include "immcda/conflict.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace immcda {

ConflictPrediction predictRange(const Vec2& position, const Vec2& step_delta, int j,
                                double r_safe) {
  ConflictPrediction p;
  p.horizon_j = j;
  p.predicted_point = position + static_cast<double>(j) * step_delta;
  p.predicted_range = p.predicted_point.norm();
  p.unsafe = p.predicted_range < r_safe;
  return p;
}

std::optional<ConflictPrediction> detectConflict(const Vec2& est_position,
                                                 const Vec2& est_velocity, double dt,
                                                 double r_safe, int lookahead_max) {
  const Vec2 step_delta = est_velocity * dt;
  for (int j = 1; j <= lookahead_max; ++j) {
    auto p = predictRange(est_position, step_delta, j, r_safe);
    if (p.unsafe) return p;
  }
  return std::nullopt;
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

Advisory escapeAngle(const Vec2& b, const Vec2& c, double r_safe) {
  if (!(r_safe > 0.0)) throw std::invalid_argument("escape angle: r_safe must be positive");
  const Vec2 track = c - b;
  if (track.squaredNorm() == 0.0) {
    throw std::invalid_argument("escape angle: predicted point coincides with current position");
  }
  const Vec2 line_of_sight = -b;
  const double bo = b.norm();

  Advisory a;
  a.gamma = std::atan2(cross2(track, line_of_sight), track.dot(line_of_sight));

  if (bo < r_safe) {
    // Inside the protected disc: turn as hard as allowed, swinging the track toward radial-out.
    a.interior_breach = true;
    a.beta = std::numbers::pi / 2.0;
    a.theta_unclamped = cross2(b, track) >= 0.0 ? kMaxEscapeAngle : -kMaxEscapeAngle;
    a.theta = a.theta_unclamped;
    return a;
  }

  a.beta = std::asin(std::min(r_safe / bo, 1.0));
  // Tangent on the same side of the line of sight as the track: |theta| = beta - |gamma|.
  a.theta_unclamped = a.gamma >= 0.0 ? a.beta - a.gamma : -a.beta - a.gamma;
  a.theta = std::clamp(a.theta_unclamped, -kMaxEscapeAngle, kMaxEscapeAngle);
  return a;
}

Mat2 rotation2d(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Mat5 frameRotationMatrix(double theta) {
  const Mat2 r = rotation2d(-theta);
  Mat5 t = Mat5::Identity();
  for (const auto& [row_a, row_b] : {std::pair{kX1, kX2}, std::pair{kVx1, kVx2}}) {
    t(row_a, row_a) = r(0, 0);
    t(row_a, row_b) = r(0, 1);
    t(row_b, row_a) = r(1, 0);
    t(row_b, row_b) = r(1, 1);
  }
  return t;
}

Mat5 trackRedirectMatrix(double theta) {
  const Mat2 r = rotation2d(-theta);
  Mat5 t = Mat5::Identity();
  t(kVx1, kVx1) = r(0, 0);
  t(kVx1, kVx2) = r(0, 1);
  t(kVx2, kVx1) = r(1, 0);
  t(kVx2, kVx2) = r(1, 1);
  return t;
}

ContinuousState rotateFrame(const ContinuousState& state, double theta) {
  return ContinuousState::fromVector(frameRotationMatrix(theta) * state.vector());
}

ContinuousState redirectTrack(const ContinuousState& state, double theta) {
  return ContinuousState::fromVector(trackRedirectMatrix(theta) * state.vector());
}

ImmBelief applyAvoidance(const ImmBelief& belief, const Advisory& advisory) {
  const Mat5 t = trackRedirectMatrix(advisory.theta);
  ImmBelief out = belief;
  for (auto& mode_belief : out.per_mode) {
    mode_belief.mean = t * mode_belief.mean;
    mode_belief.cov = symmetrized(t * mode_belief.cov * t.transpose());
  }
  return out;
}

}  // namespace immcda
