#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "stt/geometry.hpp"

namespace stt {

/// Gains of the distributed recursive estimator. gamma1 and gamma2 shape the
/// forgetting factor, c trades measurement terms against consensus terms,
/// and sigma_nu scales the pseudo-measurement weight R = I/sigma_nu^2.
struct SttParams {
  double c = 1.8202;
  double gamma1 = 7.1609;
  double gamma2 = 6.1323;
  double sigma_nu = 3.0;

  void validate() const {
    if (!std::isfinite(c) || c <= 0.0) {
      throw ConfigError("estimator gain c must be finite and > 0");
    }
    if (!std::isfinite(gamma1) || !std::isfinite(gamma2) || gamma2 <= 0.0 ||
        gamma1 <= gamma2) {
      throw ConfigError("forgetting constants must satisfy gamma1 > gamma2 > 0");
    }
    if (!std::isfinite(sigma_nu) || sigma_nu <= 0.0) {
      throw ConfigError("sigma_nu must be finite and > 0");
    }
  }

  /// Information weight of one pseudo-measurement.
  Mat3 measurement_weight() const {
    return Mat3::Identity() / (sigma_nu * sigma_nu);
  }
};

/// Discounted credibility of a measurement taken at lag steps in the past:
///   lambda = gamma2^lag / (|A| (1 + gamma1))^(lag + 1).
/// Non-increasing in lag whenever gamma1 >= gamma2 and |A| >= 1. Lag 0
/// yields 1/(|A| (1 + gamma1)), the weight of the current step.
inline double forgetting_factor(const SttParams& p, double norm_a, int lag) {
  if (lag < 0) {
    throw ConfigError("forgetting factor lag must be >= 0");
  }
  const double base = norm_a * (1.0 + p.gamma1);
  return std::pow(p.gamma2, lag) / std::pow(base, lag + 1);
}

/// One observer's running estimate.
struct EstimatorState {
  Vec6 x = Vec6::Zero();       // state estimate
  Mat6 m = Mat6::Identity();   // symmetric positive definite gain matrix
  int step = 0;
};

/// Throws unless m is symmetric (1e-10) and positive definite.
inline void validate_state(const EstimatorState& s) {
  if (!s.x.allFinite() || !s.m.allFinite()) {
    throw NumericalError("estimator state contains non-finite values");
  }
  if ((s.m - s.m.transpose()).norm() > 1e-10) {
    throw NumericalError("estimator gain matrix is not symmetric");
  }
  const Eigen::LLT<Mat6> llt(s.m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("estimator gain matrix is not positive definite");
  }
}

/// The packet an observer broadcasts each round: its propagated estimate
/// plus its current pseudo-linearized measurement.
struct NeighborMessage {
  Vec6 x_pred = Vec6::Zero();
  Vec3 z = Vec3::Zero();
  Mat36 H = Mat36::Zero();

  /// Flat wire layout: x_pred (6), z (3), H row-major (18).
  std::array<double, 27> to_array() const {
    std::array<double, 27> a{};
    for (int i = 0; i < 6; ++i) a[i] = x_pred(i);
    for (int i = 0; i < 3; ++i) a[6 + i] = z(i);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 6; ++c) a[9 + 6 * r + c] = H(r, c);
    return a;
  }

  static NeighborMessage from_array(const std::array<double, 27>& a) {
    NeighborMessage m;
    for (int i = 0; i < 6; ++i) m.x_pred(i) = a[i];
    for (int i = 0; i < 3; ++i) m.z(i) = a[6 + i];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 6; ++c) m.H(r, c) = a[9 + 6 * r + c];
    return m;
  }
};

/// Convex weights an observer assigns to itself and each in-neighbor.
/// alpha weighs measurement terms, beta weighs consensus terms; both
/// include the self id and sum to one.
struct StepWeights {
  std::map<int, double> alpha;
  std::map<int, double> beta;
};

inline void validate_weights(const StepWeights& w) {
  for (const auto* m : {&w.alpha, &w.beta}) {
    double sum = 0.0;
    for (const auto& [id, v] : *m) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ConfigError("weight for observer " + std::to_string(id) +
                          " must be finite and >= 0");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw ConfigError("weights must sum to 1 (got " + std::to_string(sum) +
                        ")");
    }
  }
  if (w.alpha.size() != w.beta.size() ||
      !std::equal(w.alpha.begin(), w.alpha.end(), w.beta.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw ConfigError("alpha and beta weights must cover the same observers");
  }
}

/// Uniform weights 1/(1 + |neighbors|) over self and neighbors.
inline StepWeights equal_weights(int self_id, const std::vector<int>& neighbors) {
  StepWeights w;
  const double v = 1.0 / (1.0 + static_cast<double>(neighbors.size()));
  w.alpha[self_id] = v;
  w.beta[self_id] = v;
  for (int id : neighbors) {
    if (id == self_id) throw ConfigError("neighbor list contains self");
    w.alpha[id] = v;
    w.beta[id] = v;
  }
  return w;
}

/// Drops every id not in `present` and rescales both maps back to sum one.
/// Used when messages are lost: the convex-combination constraint must
/// survive the drop.
inline StepWeights restrict_weights(const StepWeights& w,
                                    const std::vector<int>& present) {
  StepWeights out;
  for (int id : present) {
    if (auto it = w.alpha.find(id); it != w.alpha.end()) out.alpha[id] = it->second;
    if (auto it = w.beta.find(id); it != w.beta.end()) out.beta[id] = it->second;
  }
  double sa = 0.0, sb = 0.0;
  for (const auto& [id, v] : out.alpha) sa += v;
  for (const auto& [id, v] : out.beta) sb += v;
  if (sa <= 0.0 || sb <= 0.0) {
    throw ConfigError("no weight mass left after restricting to received set");
  }
  for (auto& [id, v] : out.alpha) v /= sa;
  for (auto& [id, v] : out.beta) v /= sb;
  return out;
}

struct Prediction {
  Vec6 x;       // A x_hat
  Mat6 m_pred;  // (A M A^T)^{-1} / ((1 + gamma1) |A|)
};

/// Propagates the estimate one step and forms the discounted inverse of the
/// propagated gain matrix.
inline Prediction predict(const EstimatorState& s, const TransitionModel& f,
                          const SttParams& p) {
  Prediction out;
  out.x = f.apply(s.x);
  const Mat6 propagated = f.matrix() * s.m * f.matrix().transpose();
  const Eigen::LLT<Mat6> llt(propagated);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("propagated gain matrix is not positive definite");
  }
  const Mat6 inv = llt.solve(Mat6::Identity());
  out.m_pred = (0.5 * (inv + inv.transpose())) / ((1.0 + p.gamma1) * f.norm());
  return out;
}

struct Innovation {
  Vec6 e_meas;  // c sum_j alpha_j H_j^T R (z_j - H_j x_pred)
  Vec6 e_cons;  // sum_j beta_j (x_pred_j - x_pred), self term zero
  Mat6 S;       // c sum_j alpha_j H_j^T R H_j + I
};

/// Fuses the observer's own pseudo-measurement with the packets received
/// from its neighbors. Weight keys must cover exactly the self id plus the
/// senders of msgs.
inline Innovation innovate(int self_id, const Vec6& x_pred,
                           const PseudoMeasurement& own,
                           const std::map<int, NeighborMessage>& msgs,
                           const StepWeights& w, const SttParams& p) {
  validate_weights(w);
  if (msgs.count(self_id)) {
    throw ConfigError("received message set must not contain the self id");
  }
  if (w.alpha.size() != msgs.size() + 1 || !w.alpha.count(self_id)) {
    throw ConfigError("weight keys must cover exactly self plus senders");
  }
  for (const auto& [id, msg] : msgs) {
    if (!w.alpha.count(id)) {
      throw ConfigError("no weight for sender " + std::to_string(id));
    }
  }

  const double r_scale = 1.0 / (p.sigma_nu * p.sigma_nu);
  Innovation out;
  out.e_meas.setZero();
  out.e_cons.setZero();
  out.S.setIdentity();

  auto accumulate = [&](double alpha, const Vec3& z, const Mat36& h) {
    out.e_meas += (p.c * alpha * r_scale) * (h.transpose() * (z - h * x_pred));
    out.S += (p.c * alpha * r_scale) * (h.transpose() * h);
  };
  accumulate(w.alpha.at(self_id), own.z, own.H);
  for (const auto& [id, msg] : msgs) {
    accumulate(w.alpha.at(id), msg.z, msg.H);
    out.e_cons += w.beta.at(id) * (msg.x_pred - x_pred);
  }
  return out;
}

/// Closes the step: M = (gamma2 m_pred + S)^{-1}, symmetrized, then
/// x = x_pred + M (e_meas + e_cons).
inline EstimatorState correct(const Prediction& pred, const Innovation& inn,
                              const SttParams& p, int new_step) {
  const Mat6 to_invert = p.gamma2 * pred.m_pred + inn.S;
  const Eigen::LLT<Mat6> llt(to_invert);
  if (llt.info() != Eigen::Success) {
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(
        0.5 * (to_invert + to_invert.transpose()));
    throw NumericalError(
        "correction matrix not positive definite (min eigenvalue " +
        std::to_string(eig.eigenvalues()(0)) + ")");
  }
  EstimatorState s;
  const Mat6 m = llt.solve(Mat6::Identity());
  s.m = 0.5 * (m + m.transpose());
  s.x = pred.x + s.m * (inn.e_meas + inn.e_cons);
  s.step = new_step;
  return s;
}

/// The packet this observer contributes to the current round.
inline NeighborMessage make_message(const EstimatorState& s,
                                    const TransitionModel& f,
                                    const PseudoMeasurement& own) {
  NeighborMessage m;
  m.x_pred = f.apply(s.x);
  m.z = own.z;
  m.H = own.H;
  return m;
}

struct StepResult {
  EstimatorState state;
  NeighborMessage broadcast;  // what this observer sent this round
};

/// One synchronous round for one observer: predict, innovate on the packets
/// received this round, correct. Also returns the packet the observer
/// itself broadcast (its prediction plus current measurement), which peers
/// consume in the same round.
inline StepResult step(const EstimatorState& s, const TransitionModel& f,
                       const SttParams& p, const PseudoMeasurement& own,
                       const std::map<int, NeighborMessage>& msgs,
                       const StepWeights& w, int self_id) {
  StepResult out;
  const Prediction pred = predict(s, f, p);
  const Innovation inn = innovate(self_id, pred.x, own, msgs, w, p);
  out.state = correct(pred, inn, p, s.step + 1);
  out.broadcast.x_pred = pred.x;
  out.broadcast.z = own.z;
  out.broadcast.H = own.H;
  return out;
}

}  // namespace stt
