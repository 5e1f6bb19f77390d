#pragma once

#include <vector>

#include <Eigen/Dense>

#include "stt/geometry.hpp"

namespace stt {

// Reference filters the simulator compares against: a centralized Kalman
// filter on the stacked pseudo-linear measurements (CKF) and the
// single-observer special case (PLKF).

/// Discretized continuous white-noise-acceleration process noise with
/// intensity q (m^2/s^3):
///   Q = q [[dt^3/3 I, dt^2/2 I], [dt^2/2 I, dt I]].
inline Mat6 cwna_process_noise(double dt, double q) {
  if (!(dt > 0.0) || !(q > 0.0)) {
    throw ConfigError("process noise needs dt > 0 and q > 0");
  }
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = (q * dt * dt * dt / 3.0) * Mat3::Identity();
  out.topRightCorner<3, 3>() = (q * dt * dt / 2.0) * Mat3::Identity();
  out.bottomLeftCorner<3, 3>() = out.topRightCorner<3, 3>();
  out.bottomRightCorner<3, 3>() = (q * dt) * Mat3::Identity();
  return out;
}

/// Kalman filter state plus the tuning it carries between steps. The
/// stacked measurement weight is block diagonal with sigma_nu^2 I per
/// observation, so only the scalar needs to travel.
struct CkfState {
  Vec6 x = Vec6::Zero();
  Mat6 p = Mat6::Identity();
  Mat6 q = Mat6::Identity();
  double sigma_nu = 1.0;
  /// Raised when the most recent update's stacked geometry could not pin
  /// down all three position axes (covariance inflates along the blind
  /// direction instead of contracting).
  bool degenerate = false;
};

inline CkfState ckf_init(const Vec3& p0, const Mat6& q, double sigma_nu,
                         double pos_sigma, double vel_sigma) {
  if (!(sigma_nu > 0.0) || !(pos_sigma > 0.0) || !(vel_sigma > 0.0)) {
    throw ConfigError("filter init sigmas must be > 0");
  }
  CkfState s;
  s.x.head<3>() = p0;
  s.p.topLeftCorner<3, 3>() = pos_sigma * pos_sigma * Mat3::Identity();
  s.p.bottomRightCorner<3, 3>() = vel_sigma * vel_sigma * Mat3::Identity();
  s.q = q;
  s.sigma_nu = sigma_nu;
  return s;
}

/// One predict/update cycle on all observations at once. Covariance update
/// in Joseph form so it stays symmetric positive semidefinite even with an
/// aggressive gain.
inline CkfState ckf_step(const CkfState& state, const TransitionModel& model,
                         const std::vector<PseudoMeasurement>& obs) {
  if (obs.empty()) {
    throw ConfigError("centralized filter step needs at least one observation");
  }
  const Mat6& a = model.matrix();
  const Vec6 x_pred = model.apply(state.x);
  Mat6 p_pred = a * state.p * a.transpose() + state.q;
  p_pred = 0.5 * (p_pred + p_pred.transpose());

  const int m = static_cast<int>(obs.size());
  Eigen::MatrixXd h(3 * m, 6);
  Eigen::VectorXd z(3 * m);
  Mat3 gram = Mat3::Zero();
  for (int i = 0; i < m; ++i) {
    h.middleRows<3>(3 * i) = obs[i].H;
    z.segment<3>(3 * i) = obs[i].z;
    gram += obs[i].P;
  }
  const double r_var = state.sigma_nu * state.sigma_nu;

  Eigen::MatrixXd s = h * p_pred * h.transpose();
  s.diagonal().array() += r_var;
  const Eigen::MatrixXd k =
      Eigen::LLT<Eigen::MatrixXd>(s).solve(h * p_pred).transpose();

  CkfState next = state;
  next.x = x_pred + k * (z - h * x_pred);
  const Mat6 ikh = Mat6::Identity() - k * h;
  Mat6 p = ikh * p_pred * ikh.transpose() + r_var * (k * k.transpose());
  next.p = 0.5 * (p + p.transpose());

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(gram);
  next.degenerate = eig.eigenvalues()(0) <=
                    1e-9 * std::max(1.0, eig.eigenvalues()(2));
  return next;
}

/// Non-cooperative variant: each observer filters only its own measurement.
inline CkfState plkf_step(const CkfState& state, const TransitionModel& model,
                          const PseudoMeasurement& obs) {
  return ckf_step(state, model, {obs});
}

}  // namespace stt
