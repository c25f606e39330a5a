#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace immcda {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat25 = Eigen::Matrix<double, 2, 5>;
using Mat53 = Eigen::Matrix<double, 5, 3>;

inline constexpr int kNumModes = 3;

// Component layout of the 5-element state vector.
enum StateIndex : int { kX1 = 0, kVx1 = 1, kX2 = 2, kVx2 = 3, kOmega = 4 };

/// Relative kinematic state of the tracked aircraft, reference aircraft at the origin.
struct ContinuousState {
  double x1 = 0.0;     // east position (m)
  double vx1 = 0.0;    // east velocity (m/s)
  double x2 = 0.0;     // north position (m)
  double vx2 = 0.0;    // north velocity (m/s)
  double omega = 0.0;  // turn rate (rad/s)

  [[nodiscard]] Vec5 vector() const {
    Vec5 v;
    v << x1, vx1, x2, vx2, omega;
    return v;
  }
  [[nodiscard]] static ContinuousState fromVector(const Vec5& v) {
    return {v[kX1], v[kVx1], v[kX2], v[kVx2], v[kOmega]};
  }
  [[nodiscard]] Vec2 position() const { return {x1, x2}; }
  [[nodiscard]] Vec2 velocity() const { return {vx1, vx2}; }
  [[nodiscard]] double range() const { return position().norm(); }
  [[nodiscard]] double speed() const { return velocity().norm(); }
  [[nodiscard]] bool finite() const { return vector().allFinite(); }

  bool operator==(const ContinuousState&) const = default;
};

enum class ModeId : int { Straight = 1, LeftTurn = 2, RightTurn = 3 };

inline constexpr std::array<ModeId, kNumModes> kAllModes = {ModeId::Straight, ModeId::LeftTurn,
                                                            ModeId::RightTurn};

/// Zero-based slot of a mode in per-mode arrays.
[[nodiscard]] constexpr int modeIndex(ModeId m) { return static_cast<int>(m) - 1; }

[[nodiscard]] inline ModeId modeFromIndex(int idx) {
  if (idx < 0 || idx >= kNumModes) {
    throw std::out_of_range("mode index out of range: " + std::to_string(idx));
  }
  return static_cast<ModeId>(idx + 1);
}

[[nodiscard]] inline ModeId modeFromValue(int value) { return modeFromIndex(value - 1); }

[[nodiscard]] inline const char* modeName(ModeId m) {
  switch (m) {
    case ModeId::Straight:
      return "straight";
    case ModeId::LeftTurn:
      return "left-turn";
    case ModeId::RightTurn:
      return "right-turn";
  }
  return "?";
}

}  // namespace immcda
