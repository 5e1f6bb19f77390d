#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "stt/estimator.hpp"

namespace stt {

// Non-recursive re-solve of the weighted least-squares problem the
// recursion optimizes, used as a ground-truth oracle in tests. Holds the
// complete packet history in memory; intended scale is k <= 500, n <= 10.

/// Everything one observer consumed at one step: the packets of its closed
/// neighborhood (its own broadcast included under its own id) and the
/// weights it applied to them.
struct StepRecord {
  std::map<int, NeighborMessage> packets;
  StepWeights w;
};

/// Recorded run for a single observer. steps[t-1] holds time t, so the
/// record is contiguous from t = 1 to t = k by construction. The optional
/// prior realizes a start state (x0, M0) as a t = 0 ridge term with weight
/// lambda_0; omit it for the pure weighted-least-squares form (the
/// M0^{-1} -> 0 limit).
struct History {
  int self_id;
  TransitionModel model;
  SttParams params;
  std::vector<StepRecord> steps;
  std::optional<std::pair<Vec6, Mat6>> prior;
};

inline void validate_history(const History& h) {
  h.params.validate();
  for (const StepRecord& rec : h.steps) {
    if (!rec.packets.count(h.self_id)) {
      throw ConfigError("history step lacks the observer's own packet");
    }
    if (rec.packets.size() != rec.w.alpha.size()) {
      throw ConfigError("history step weights do not cover its packets");
    }
    for (const auto& [id, pkt] : rec.packets) {
      if (!rec.w.alpha.count(id)) {
        throw ConfigError("history step has no weight for observer " +
                          std::to_string(id));
      }
    }
    validate_weights(rec.w);
  }
}

struct BatchTerms {
  Vec6 y;   // (A^{t-k})^T sum_j (c alpha_j H_j^T R z_j + beta_j xPred_j)
  Mat6 S;   // (A^{t-k})^T (c sum_j alpha_j H_j^T R H_j + I) A^{t-k}
};

/// Assembles the time-t contribution to the step-k normal equations,
/// pulled back through A^{t-k}. Requires 1 <= t <= k <= recorded length.
inline BatchTerms build_terms(const History& h, int t, int k) {
  if (t < 1 || t > k || k > static_cast<int>(h.steps.size())) {
    throw ConfigError("build_terms needs 1 <= t <= k <= history length");
  }
  const StepRecord& rec = h.steps[t - 1];
  const double r_scale = 1.0 / (h.params.sigma_nu * h.params.sigma_nu);

  Mat6 inner_s = Mat6::Identity();
  Vec6 inner_y = Vec6::Zero();
  for (const auto& [id, pkt] : rec.packets) {
    const double a = rec.w.alpha.at(id);
    const double b = rec.w.beta.at(id);
    inner_s += (h.params.c * a * r_scale) * (pkt.H.transpose() * pkt.H);
    inner_y += (h.params.c * a * r_scale) * (pkt.H.transpose() * pkt.z) +
               b * pkt.x_pred;
  }
  const Mat6 pullback = h.model.power(t - k);
  BatchTerms out;
  out.S = pullback.transpose() * inner_s * pullback;
  out.y = pullback.transpose() * inner_y;
  return out;
}

namespace detail {

inline Mat6 prior_information(const History& h) {
  const Eigen::LLT<Mat6> llt(h.prior->second);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("prior gain matrix is not positive definite");
  }
  const Mat6 inv = llt.solve(Mat6::Identity());
  return 0.5 * (inv + inv.transpose());
}

}  // namespace detail

/// sum_t lambda_t S_t plus, when a prior is present, the t = 0 ridge
/// lambda_0 (A^{-k})^T M0^{-1} A^{-k}.
inline Mat6 normal_matrix(const History& h, int k = -1) {
  if (k < 0) k = static_cast<int>(h.steps.size());
  const double norm_a = h.model.norm();
  Mat6 g = Mat6::Zero();
  for (int t = 1; t <= k; ++t) {
    g += forgetting_factor(h.params, norm_a, k - t) * build_terms(h, t, k).S;
  }
  if (h.prior) {
    const Mat6 pb = h.model.power(-k);
    g += forgetting_factor(h.params, norm_a, k) *
         (pb.transpose() * detail::prior_information(h) * pb);
  }
  return g;
}

/// sum_t lambda_t y_t plus the matching prior term
/// lambda_0 (A^{-k})^T M0^{-1} x0.
inline Vec6 information_vector(const History& h, int k = -1) {
  if (k < 0) k = static_cast<int>(h.steps.size());
  const double norm_a = h.model.norm();
  Vec6 v = Vec6::Zero();
  for (int t = 1; t <= k; ++t) {
    v += forgetting_factor(h.params, norm_a, k - t) * build_terms(h, t, k).y;
  }
  if (h.prior) {
    const Mat6 pb = h.model.power(-k);
    v += forgetting_factor(h.params, norm_a, k) *
         (pb.transpose() * (detail::prior_information(h) * h.prior->first));
  }
  return v;
}

/// Closed-form minimizer (sum lambda S)^{-1} (sum lambda y). Throws
/// ObservabilityError when the normal matrix is numerically singular.
inline Vec6 batch_solve(const History& h, int k = -1) {
  const Mat6 g = normal_matrix(h, k);
  const Eigen::SelfAdjointEigenSolver<Mat6> eig(g);
  const double sigma_min = eig.eigenvalues()(0);
  const double sigma_max = eig.eigenvalues()(5);
  if (!(sigma_min > 1e-10 * std::max(1.0, sigma_max))) {
    throw ObservabilityError(
        "normal matrix numerically singular: sigma_min = " +
        std::to_string(sigma_min));
  }
  return eig.eigenvectors() *
         (eig.eigenvalues().cwiseInverse().asDiagonal() *
          (eig.eigenvectors().transpose() * information_vector(h, k)));
}

/// Gain matrix the recursion should hold at step k:
/// lambda_k (sum lambda S)^{-1}.
inline Mat6 batch_m_hat(const History& h, int k = -1) {
  if (k < 0) k = static_cast<int>(h.steps.size());
  const Mat6 g = normal_matrix(h, k);
  const Eigen::LLT<Mat6> llt(g);
  if (llt.info() != Eigen::Success) {
    throw ObservabilityError("normal matrix not positive definite");
  }
  const Mat6 inv = llt.solve(Mat6::Identity());
  return forgetting_factor(h.params, h.model.norm(), 0) *
         (0.5 * (inv + inv.transpose()));
}

/// The discounted cost the estimator minimizes at step k, evaluated at an
/// arbitrary candidate x: measurement residuals weighted by c alpha R plus
/// consensus residuals weighted by beta, every time slice pulled back
/// through A^{t-k} and discounted by lambda, plus the prior ridge when one
/// is recorded. Non-negative by construction.
inline double objective(const History& h, const Vec6& x, int k = -1) {
  if (k < 0) k = static_cast<int>(h.steps.size());
  if (k < 1) {
    throw ConfigError("objective needs a non-empty history");
  }
  const double norm_a = h.model.norm();
  const double r_scale = 1.0 / (h.params.sigma_nu * h.params.sigma_nu);
  double j = 0.0;
  for (int t = 1; t <= k; ++t) {
    const StepRecord& rec = h.steps[t - 1];
    const Vec6 xt = h.model.power(t - k) * x;
    double meas = 0.0, cons = 0.0;
    for (const auto& [id, pkt] : rec.packets) {
      meas += rec.w.alpha.at(id) * (pkt.z - pkt.H * xt).squaredNorm();
      cons += rec.w.beta.at(id) * (pkt.x_pred - xt).squaredNorm();
    }
    j += forgetting_factor(h.params, norm_a, k - t) *
         (h.params.c * r_scale * meas + cons);
  }
  if (h.prior) {
    const Vec6 d = h.model.power(-k) * x - h.prior->first;
    j += forgetting_factor(h.params, norm_a, k) *
         d.dot(detail::prior_information(h) * d);
  }
  return j;
}

}  // namespace stt
