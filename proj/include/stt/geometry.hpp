#pragma once

#include <cmath>
#include <random>
#include <string>

#include "stt/types.hpp"

namespace stt {

/// Position and velocity of the tracked object.
struct TargetState {
  Vec3 p;
  Vec3 v;

  Vec6 vec() const {
    Vec6 x;
    x << p, v;
    return x;
  }
  static TargetState from_vec(const Vec6& x) {
    return {x.head<3>(), x.tail<3>()};
  }
};

/// Unit direction from an observer toward the target. The stored vector is
/// renormalized at construction, so downstream algebra can rely on
/// |g| = 1 to machine precision.
class Bearing {
 public:
  /// Wraps a direction that is already unit length. Throws
  /// InvalidBearingError if the norm deviates from 1 by more than 1e-9.
  explicit Bearing(const Vec3& unit) {
    const double n = unit.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-9) {
      throw InvalidBearingError("bearing norm " + std::to_string(n) +
                                " deviates from 1 by more than 1e-9");
    }
    g_ = unit / n;
  }

  const Vec3& vec() const { return g_; }

  /// Angle to another bearing in [0, pi].
  double angle_to(const Bearing& other) const {
    return std::atan2(g_.cross(other.g_).norm(), g_.dot(other.g_));
  }

 private:
  Vec3 g_;
};

/// Line-of-sight direction (p - s)/|p - s| from observer position s to
/// target position p. Throws DegenerateGeometryError when the two points
/// coincide (separation below 1e-12).
inline Bearing unit_bearing(const Vec3& target, const Vec3& observer) {
  const Vec3 d = target - observer;
  const double r = d.norm();
  if (!(r > 1e-12)) {
    throw DegenerateGeometryError("observer and target coincide (range " +
                                  std::to_string(r) + ")");
  }
  return Bearing(d / r);
}

/// Orthogonal projection onto the plane normal to g:  P = I - g g^T.
/// P is symmetric, idempotent, annihilates g, and has eigenvalues {0, 1, 1}.
inline Mat3 projection(const Bearing& g) {
  return Mat3::Identity() - g.vec() * g.vec().transpose();
}

/// Rotates the true bearing by an angle drawn from N(0, sigma^2) about an
/// axis drawn uniformly in the plane orthogonal to g. sigma = 0 returns g
/// unchanged and consumes no randomness; otherwise exactly two variates are
/// drawn (axis angle first, then rotation angle).
inline Bearing perturb_bearing(const Bearing& g, double sigma,
                               std::mt19937_64& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("bearing noise sigma must be finite and >= 0");
  }
  if (sigma == 0.0) {
    return g;
  }
  std::uniform_real_distribution<double> axis_angle(0.0, 2.0 * M_PI);
  std::normal_distribution<double> rot_angle(0.0, sigma);
  const double phi = axis_angle(rng);
  const double theta = rot_angle(rng);

  const Vec3 e1 = g.vec().unitOrthogonal();
  const Vec3 e2 = g.vec().cross(e1);
  const Vec3 axis = std::cos(phi) * e1 + std::sin(phi) * e2;
  // Rodrigues' formula with axis orthogonal to g.
  const Vec3 rotated =
      std::cos(theta) * g.vec() + std::sin(theta) * axis.cross(g.vec());
  return Bearing(rotated.normalized());
}

/// One bearing observation rewritten as a linear measurement of the target
/// state. With P the projection orthogonal to the observed bearing,
/// z = P s and H = [P | 0], so that H x - z = P (p - s) for the true
/// position p, which vanishes exactly when the bearing is noiseless.
struct PseudoMeasurement {
  Vec3 z;
  Mat36 H;
  Mat3 P;  // projection used to build z and H
  Vec3 s;  // observer position the projection was applied to
};

inline PseudoMeasurement pseudo_linearize(const Bearing& g_tilde,
                                          const Vec3& s_tilde) {
  PseudoMeasurement m;
  m.P = projection(g_tilde);
  m.s = s_tilde;
  m.z = m.P * s_tilde;
  m.H.setZero();
  m.H.leftCols<3>() = m.P;
  return m;
}

/// Constant-velocity transition over one step of dt seconds:
///   A = [ I  dt I ]
///       [ 0     I ]
/// The spectral norm is computed from the 2x2 scalar block [[1, dt], [0, 1]]
/// whose singular values carry over to A unchanged.
class TransitionModel {
 public:
  explicit TransitionModel(double dt) : dt_(dt) {
    if (!std::isfinite(dt) || dt <= 0.0) {
      throw ConfigError("step length dt must be finite and > 0");
    }
    a_ = power(1);
    Eigen::Matrix2d b;
    b << 1.0, dt_, 0.0, 1.0;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(b);
    norm_ = svd.singularValues()(0);
  }

  double dt() const { return dt_; }
  const Mat6& matrix() const { return a_; }

  /// Spectral norm of A. Because det of the 2x2 block is 1, this also
  /// equals the spectral norm of A^{-1}.
  double norm() const { return norm_; }

  /// A^m for any integer m, including negative powers. The 2x2 block
  /// satisfies B^m = [[1, m dt], [0, 1]] exactly, which is the same result
  /// m repeated multiplications by B (or by its exact inverse) would give.
  Mat6 power(int m) const {
    Mat6 r = Mat6::Identity();
    r.topRightCorner<3, 3>() = (m * dt_) * Mat3::Identity();
    return r;
  }

  Vec6 apply(const Vec6& x) const {
    Vec6 y = x;
    y.head<3>() += dt_ * x.tail<3>();
    return y;
  }

 private:
  double dt_;
  double norm_;
  Mat6 a_;
};

struct IdentityCheckResult {
  bool evaluated = false;  // false when a required inverse does not exist
  bool holds = false;
  double rel_error = 0.0;
  std::string note;
};

/// Evaluates both sides of the inversion identity
///   (A + C)^{-1} = (I - (C^{-1} A + I)^{-1}) A^{-1}
/// and reports whether they agree within rel_tol (Frobenius norm, relative
/// to max(1, |lhs|)). Singular inputs are reported, not thrown.
inline IdentityCheckResult matrix_inverse_identity_check(
    const Mat6& a, const Mat6& c, double rel_tol = 1e-9) {
  IdentityCheckResult r;
  const Eigen::FullPivLU<Mat6> lu_sum(a + c);
  const Eigen::FullPivLU<Mat6> lu_a(a);
  const Eigen::FullPivLU<Mat6> lu_c(c);
  if (!lu_sum.isInvertible()) {
    r.note = "A + C is singular";
    return r;
  }
  if (!lu_a.isInvertible()) {
    r.note = "A is singular";
    return r;
  }
  if (!lu_c.isInvertible()) {
    r.note = "C is singular";
    return r;
  }
  const Mat6 inner = lu_c.solve(a) + Mat6::Identity();
  const Eigen::FullPivLU<Mat6> lu_inner(inner);
  if (!lu_inner.isInvertible()) {
    r.note = "C^{-1} A + I is singular";
    return r;
  }
  const Mat6 lhs = lu_sum.inverse();
  const Mat6 rhs = (Mat6::Identity() - lu_inner.inverse()) * lu_a.inverse();
  r.evaluated = true;
  r.rel_error = (lhs - rhs).norm() / std::max(1.0, lhs.norm());
  r.holds = r.rel_error <= rel_tol;
  return r;
}

}  // namespace stt
