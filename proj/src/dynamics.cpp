#include "immcda/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace immcda {

TransitionMatrix::TransitionMatrix(const Mat3& pi) : pi_(pi) {
  if (auto err = validate(pi); !err.empty()) {
    throw std::invalid_argument("transition matrix: " + err);
  }
}

TransitionMatrix TransitionMatrix::nominal() {
  Mat3 pi;
  pi << 0.80, 0.10, 0.10,  //
      0.19, 0.80, 0.01,    //
      0.19, 0.01, 0.80;
  return TransitionMatrix(pi);
}

std::string TransitionMatrix::validate(const Mat3& pi) {
  std::ostringstream os;
  for (int i = 0; i < kNumModes; ++i) {
    for (int j = 0; j < kNumModes; ++j) {
      const double p = pi(i, j);
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        os << "entry (" << i << "," << j << ") = " << p << " outside [0,1]";
        return os.str();
      }
    }
    const double sum = pi.row(i).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      os.precision(17);
      os << "row " << i << " sums to " << sum << ", expected 1";
      return os.str();
    }
  }
  return {};
}

NoiseModel NoiseModel::nominal() {
  NoiseModel n;
  n.process_cov = Vec5(200.0, 0.1, 200.0, 0.1, 0.001).asDiagonal();
  n.meas_cov = Vec2(50.0 * 50.0, 50.0 * 50.0).asDiagonal();
  return n;
}

Mat25 NoiseModel::measurementMatrix() {
  Mat25 h = Mat25::Zero();
  h(0, kX1) = 1.0;
  h(1, kX2) = 1.0;
  return h;
}

bool isSymmetricPsd(const Eigen::Ref<const Eigen::MatrixXd>& m, double rel_tol) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > rel_tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double trace = std::max(std::abs(m.trace()), 1e-300);
  return es.eigenvalues().minCoeff() >= -rel_tol * trace;
}

namespace {

// sin(w dt)/w and (1 - cos(w dt))/w, continuous through w = 0.
struct TurnCoefficients {
  double sin_term;
  double cos_term;
};

TurnCoefficients turnCoefficients(double omega, double dt) {
  const double a = omega * dt;
  if (std::abs(a) < 1e-4) {
    const double a2 = a * a;
    return {dt * (1.0 - a2 / 6.0 + a2 * a2 / 120.0), dt * a * (0.5 - a2 / 24.0 + a2 * a2 / 720.0)};
  }
  return {std::sin(a) / omega, (1.0 - std::cos(a)) / omega};
}

}  // namespace

Mat5 coordinatedTurnMatrix(double omega_eff, double dt) {
  const double a = omega_eff * dt;
  const double c = std::cos(a);
  const double s = std::sin(a);
  const auto [sw, cw] = turnCoefficients(omega_eff, dt);

  Mat5 f = Mat5::Identity();
  f(kX1, kVx1) = sw;
  f(kX1, kVx2) = -cw;
  f(kVx1, kVx1) = c;
  f(kVx1, kVx2) = -s;
  f(kX2, kVx1) = cw;
  f(kX2, kVx2) = sw;
  f(kVx2, kVx1) = s;
  f(kVx2, kVx2) = c;
  return f;
}

double modeTurnRate(ModeId mode, double base_rate) {
  switch (mode) {
    case ModeId::Straight:
      return 0.0;
    case ModeId::LeftTurn:
      return base_rate + kTurnRateOffset;
    case ModeId::RightTurn:
      return base_rate - kTurnRateOffset;
  }
  throw std::invalid_argument("unknown mode");
}

Mat5 modeMatrix(ModeId mode, double base_rate, double dt) {
  return coordinatedTurnMatrix(modeTurnRate(mode, base_rate), dt);
}

Mat53 noiseInputMatrix(double dt) {
  Mat53 b = Mat53::Zero();
  b(kX1, 0) = 0.5 * dt * dt;
  b(kVx1, 0) = dt;
  b(kX2, 1) = 0.5 * dt * dt;
  b(kVx2, 1) = dt;
  return b;
}

ContinuousState stepTruth(const ContinuousState& state, ModeId mode, double dt,
                          const Vec5& process_noise) {
  const Vec5 next = modeMatrix(mode, state.omega, dt) * state.vector() + process_noise;
  return ContinuousState::fromVector(next);
}

ModeId sampleNextMode(ModeId mode, const TransitionMatrix& pi, double u) {
  const int row = modeIndex(mode);
  double cumulative = 0.0;
  for (int j = 0; j < kNumModes; ++j) {
    cumulative += pi(row, j);
    if (u < cumulative) return modeFromIndex(j);
  }
  // u landed in the rounding gap at the top of the row; take the last reachable mode.
  for (int j = kNumModes - 1; j >= 0; --j) {
    if (pi(row, j) > 0.0) return modeFromIndex(j);
  }
  return mode;
}

ModeId sampleNextMode(ModeId mode, const Mat3& pi, double u) {
  return sampleNextMode(mode, TransitionMatrix(pi), u);
}

Vec2 measure(const ContinuousState& state, const Vec2& meas_noise) {
  return state.position() + meas_noise;
}

Vec3 propagateModeProbabilities(const TransitionMatrix& pi, const Vec3& m) {
  return pi.matrix().transpose() * m;
}

}  // namespace immcda
