#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stt/batch.hpp"
#include "stt/world.hpp"

namespace stt {

// Executable verification of the estimator's supporting results: the
// closed-form singular-value identities, the gain lower bound, the Gram
// matrix floor, and the advertised error decay rate. Each check reports a
// measured lhs against a reference rhs instead of asserting silently, so
// the CLI can emit the whole battery as JSON.

struct AngleCondition {
  double theta0 = M_PI / 6.0;  // radians, in (0, pi/2)
  double alpha0 = 1.0 / 3.0;   // minimum combination weight

  void validate() const {
    if (!(theta0 > 0.0) || !(theta0 < M_PI / 2.0)) {
      throw ConfigError("theta0 must lie in (0, pi/2)");
    }
    if (!(alpha0 > 0.0) || !(alpha0 <= 1.0)) {
      throw ConfigError("alpha0 must lie in (0, 1]");
    }
  }
};

struct CheckResult {
  std::string name;
  nlohmann::json inputs;
  double lhs = 0.0;
  double rhs = 0.0;
  bool applicable = true;
  bool pass = false;
  std::string note;
};

inline nlohmann::json to_json(const CheckResult& r) {
  return {{"check", r.name},   {"inputs", r.inputs},
          {"lhs", r.lhs},      {"rhs", r.rhs},
          {"applicable", r.applicable}, {"pass", r.pass},
          {"note", r.note}};
}

/// Time-offset factor of the pulled-back measurement gram:
/// [[1, m dt], [m dt, m^2 dt^2]] for offset m = t - k. Rank 1 and PSD.
inline Eigen::Matrix2d f_matrix(int m, double dt) {
  Eigen::Matrix2d f;
  const double s = m * dt;
  f << 1.0, s, s, s * s;
  return f;
}

/// Numerically computed smallest singular value of P_i + P_j. The closed
/// form is 1 - |cos(angle between the bearings)|.
inline double sigma_min_projection_pair(const Bearing& gi, const Bearing& gj) {
  const Mat3 sum = projection(gi) + projection(gj);
  return Eigen::SelfAdjointEigenSolver<Mat3>(sum).eigenvalues()(0);
}

inline Mat3 weighted_projection_sum(const std::vector<Bearing>& bearings,
                                    const std::vector<double>& weights) {
  if (bearings.size() != weights.size() || bearings.empty()) {
    throw ConfigError("projection sum needs matching, non-empty inputs");
  }
  Mat3 out = Mat3::Zero();
  for (size_t i = 0; i < bearings.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw ConfigError("weights must be >= 0");
    out += weights[i] * projection(bearings[i]);
  }
  return out;
}

/// Floor of the smallest eigenvalue of f_matrix(0, dt) + f_matrix(-1, dt):
/// (2 + dt^2 - sqrt(4 + dt^4)) / 2.
inline double f_delta(double dt) {
  if (!(dt > 0.0)) throw ConfigError("f_delta needs dt > 0");
  return (2.0 + dt * dt - std::sqrt(4.0 + dt * dt * dt * dt)) / 2.0;
}

/// Smallest gain c for which the weighted measurement gram is guaranteed to
/// clear 1 under the angle condition:
///   (||A||(1+g1) - 1) ||A||(1+g1) sigma_nu^2
///   / (g2 f(dt) alpha0 (1 - cos theta0)).
inline double c_lower_bound(const SttParams& p, const TransitionModel& model,
                            const AngleCondition& cond) {
  p.validate();
  cond.validate();
  const double inflated = model.norm() * (1.0 + p.gamma1);
  return (inflated - 1.0) * inflated * p.sigma_nu * p.sigma_nu /
         (p.gamma2 * f_delta(model.dt()) * cond.alpha0 *
          (1.0 - std::cos(cond.theta0)));
}

/// Checks sigma_min(sum of weighted projections) >= alpha0 (1 - cos theta0).
/// Hypotheses: every weight >= alpha0 and at least one bearing pair whose
/// angle lies in [theta0, pi - theta0]. A violated hypothesis makes the
/// check not-applicable rather than failed.
inline CheckResult pbar_lower_bound_check(const std::vector<Bearing>& bearings,
                                          const std::vector<double>& weights,
                                          const AngleCondition& cond) {
  cond.validate();
  CheckResult r;
  r.name = "pbar_lower_bound";
  r.inputs = {{"bearings", bearings.size()},
              {"theta0", cond.theta0},
              {"alpha0", cond.alpha0}};
  r.rhs = cond.alpha0 * (1.0 - std::cos(cond.theta0));

  bool weights_ok = bearings.size() == weights.size() && !weights.empty();
  for (double w : weights) {
    weights_ok = weights_ok && w >= cond.alpha0 - 1e-12;
  }
  bool pair_ok = false;
  for (size_t i = 0; i < bearings.size() && !pair_ok; ++i) {
    for (size_t j = i + 1; j < bearings.size() && !pair_ok; ++j) {
      const double a = bearings[i].angle_to(bearings[j]);
      pair_ok = a >= cond.theta0 - 1e-12 && a <= M_PI - cond.theta0 + 1e-12;
    }
  }
  if (!weights_ok || !pair_ok) {
    r.applicable = false;
    r.note = !weights_ok ? "weights fall below alpha0"
                         : "no bearing pair inside [theta0, pi - theta0]";
    return r;
  }
  const Mat3 pb = weighted_projection_sum(bearings, weights);
  r.lhs = Eigen::SelfAdjointEigenSolver<Mat3>(pb).eigenvalues()(0);
  r.pass = r.lhs >= r.rhs - 1e-12;
  return r;
}

/// Smallest eigenvalue of the forgetting-weighted normal matrix for the
/// recorded run; with the gain at or above c_lower_bound and the angle
/// condition holding each step, this must stay >= 1 (up to roundoff).
inline double gram_min_singular(const History& h, int k = -1) {
  const Mat6 g = normal_matrix(h, k);
  return Eigen::SelfAdjointEigenSolver<Mat6>(g).eigenvalues()(0);
}

/// Log-linear fit of the mean max-over-observers error envelope against the
/// guaranteed contraction (1 + gamma2) / (1 + gamma1) per step. Demands a
/// real Monte-Carlo population; refuses tiny samples.
inline CheckResult decay_rate_check(
    const std::vector<std::vector<double>>& trial_envelopes, double gamma1,
    double gamma2, int burn_in) {
  if (trial_envelopes.size() < 100) {
    throw ConfigError("decay rate check needs at least 100 trials");
  }
  const size_t steps = trial_envelopes.front().size();
  for (const auto& e : trial_envelopes) {
    if (e.size() != steps) {
      throw ConfigError("decay rate trials must share a horizon");
    }
  }
  if (burn_in < 0 || steps < static_cast<size_t>(burn_in) + 2) {
    throw ConfigError("decay rate burn-in leaves too few samples");
  }

  CheckResult r;
  r.name = "decay_rate";
  r.inputs = {{"trials", trial_envelopes.size()},
              {"steps", steps},
              {"burn_in", burn_in},
              {"gamma1", gamma1},
              {"gamma2", gamma2}};
  r.rhs = (1.0 + gamma2) / (1.0 + gamma1);

  std::vector<double> mean(steps, 0.0);
  for (const auto& e : trial_envelopes) {
    for (size_t k = 0; k < steps; ++k) mean[k] += e[k];
  }
  for (double& m : mean) m /= static_cast<double>(trial_envelopes.size());

  double sk = 0, sy = 0, skk = 0, sky = 0;
  int n = 0;
  for (size_t k = burn_in; k < steps; ++k) {
    if (mean[k] <= 1e-14) break;  // numerical floor, nothing left to fit
    const double y = std::log(mean[k]);
    sk += k;
    sy += y;
    skk += static_cast<double>(k) * k;
    sky += k * y;
    ++n;
  }
  if (n < 2) throw ConfigError("decay rate fit has fewer than two samples");
  const double slope = (n * sky - sk * sy) / (n * skk - sk * sk);
  r.lhs = std::exp(slope);

  if (!(gamma1 > gamma2)) {
    r.applicable = false;
    r.note = "contraction requires gamma1 > gamma2; bound is >= 1 here";
    return r;
  }
  r.pass = r.lhs <= r.rhs + 0.05;
  return r;
}

// --- Scenario generators + composite checks ---------------------------------

namespace theory_detail {

/// Synchronous noiseless network stepping a constant-velocity truth; every
/// observer broadcasts before anyone consumes, like the simulator does.
struct SyncWorld {
  TransitionModel f;
  SttParams p;
  std::vector<Vec3> stations;
  NeighborSets nbrs;
  Vec6 truth;
  std::vector<EstimatorState> est;

  SyncWorld(TransitionModel f_in, SttParams p_in, std::vector<Vec3> s_in,
            NeighborSets n_in, Vec6 truth0)
      : f(f_in), p(p_in), stations(std::move(s_in)), nbrs(std::move(n_in)),
        truth(truth0) {
    est.resize(stations.size());
    for (size_t i = 0; i < stations.size(); ++i) {
      est[i].x.head<3>() = stations[i];
    }
  }

  void round() {
    truth = f.apply(truth);
    const int n = static_cast<int>(stations.size());
    std::vector<PseudoMeasurement> obs;
    std::vector<NeighborMessage> out;
    obs.reserve(n);
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
      obs.push_back(pseudo_linearize(
          unit_bearing(truth.head<3>(), stations[i]), stations[i]));
      out.push_back(make_message(est[i], f, obs[i]));
    }
    std::vector<EstimatorState> next(n);
    for (int i = 0; i < n; ++i) {
      std::map<int, NeighborMessage> inbox;
      for (int j : nbrs[i]) inbox[j] = out[j];
      next[i] = step(est[i], f, p, obs[i],
                     inbox, equal_weights(i, nbrs[i]), i).state;
    }
    est = std::move(next);
  }

  double envelope() const {
    double worst = 0.0;
    for (const auto& e : est) worst = std::max(worst, (e.x - truth).norm());
    return worst;
  }

  double position_envelope() const {
    double worst = 0.0;
    for (const auto& e : est) {
      worst = std::max(worst, (e.x.head<3>() - truth.head<3>()).norm());
    }
    return worst;
  }
};

inline SttParams quiet_params() {
  SttParams p;
  p.sigma_nu = 0.005;  // keeps c = 1.8202 above the gain bound at theta0=30deg
  return p;
}

/// Observers on a jittered ring around the start of a slow constant-velocity
/// target, which keeps every step's bearing spread wide enough for the angle
/// condition to hold by construction.
inline std::vector<Vec3> ring_stations(int n, const Vec3& center,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> elev(-0.5, 0.5);
  std::uniform_real_distribution<double> radius(20.0, 35.0);
  std::vector<Vec3> s(n);
  for (int i = 0; i < n; ++i) {
    const double az = 2.0 * M_PI * i / n + jitter(rng);
    const double el = elev(rng);
    const double r = radius(rng);
    s[i] = center + r * Vec3(std::cos(el) * std::cos(az),
                             std::cos(el) * std::sin(az), std::sin(el));
  }
  return s;
}

}  // namespace theory_detail

/// Noise-free Monte-Carlo envelopes for the decay fit: random ring
/// geometry per trial, constant-velocity truth, default gains.
inline std::vector<std::vector<double>> decay_trial_envelopes(int trials,
                                                              int steps,
                                                              uint64_t seed) {
  std::vector<std::vector<double>> env(trials);
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (t + 1));
    std::uniform_real_distribution<double> pos(25.0, 35.0);
    std::uniform_real_distribution<double> vel(-1.0, 1.0);
    Vec6 truth0;
    truth0 << pos(rng), pos(rng), 0.4 * pos(rng), vel(rng), vel(rng),
        0.3 * vel(rng);
    const auto stations =
        theory_detail::ring_stations(6, truth0.head<3>(), rng);
    theory_detail::SyncWorld w(TransitionModel(0.1),
                               theory_detail::quiet_params(), stations,
                               knn_graph(stations, 2), truth0);
    env[t].reserve(steps);
    for (int k = 0; k < steps; ++k) {
      w.round();
      env[t].push_back(w.envelope());
    }
  }
  return env;
}

inline CheckResult projection_pair_check(uint64_t seed, int pairs) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, M_PI);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    Vec3 a(u(rng), u(rng), u(rng));
    while (a.norm() < 1e-3) a = Vec3(u(rng), u(rng), u(rng));
    a.normalize();
    const double theta = ang(rng);
    const Vec3 axis = a.unitOrthogonal();
    const Vec3 b = std::cos(theta) * a + std::sin(theta) * (axis.cross(a));
    const double numeric = sigma_min_projection_pair(Bearing(a), Bearing(b));
    worst = std::max(worst, std::abs(numeric - (1.0 - std::abs(std::cos(theta)))));
  }
  CheckResult r;
  r.name = "projection_pair_sigma_min";
  r.inputs = {{"pairs", pairs}, {"seed", seed}};
  r.lhs = worst;
  r.rhs = 1e-10;
  r.pass = r.lhs <= r.rhs;
  r.note = "max |numeric sigma_min - (1 - |cos theta|)| over random pairs";
  return r;
}

inline CheckResult f_delta_check() {
  double worst = 0.0;
  for (double dt : {0.01, 0.1, 0.5, 1.0, 2.0}) {
    const Eigen::Matrix2d sum = f_matrix(0, dt) + f_matrix(-1, dt);
    const double numeric =
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(sum).eigenvalues()(0);
    worst = std::max(worst, std::abs(numeric - f_delta(dt)));
  }
  CheckResult r;
  r.name = "f_delta_closed_form";
  r.inputs = {{"dt", {0.01, 0.1, 0.5, 1.0, 2.0}}};
  r.lhs = worst;
  r.rhs = 1e-12;
  r.pass = r.lhs <= r.rhs;
  r.note = "closed form vs 2x2 eigen solve of the adjacent-offset sum";
  return r;
}

inline CheckResult pbar_randomized_check(uint64_t seed, int configs) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> wr(0.2, 1.0);
  double min_margin = std::numeric_limits<double>::infinity();
  int applicable = 0;
  for (int c = 0; c < configs; ++c) {
    const int m = 2 + static_cast<int>(rng() % 5);
    std::vector<Bearing> bearings;
    for (int i = 0; i < m; ++i) {
      Vec3 v(u(rng), u(rng), u(rng));
      while (v.norm() < 1e-3) v = Vec3(u(rng), u(rng), u(rng));
      bearings.push_back(Bearing(v.normalized()));
    }
    std::vector<double> w(m);
    double total = 0.0;
    for (double& x : w) total += (x = wr(rng));
    for (double& x : w) x /= total;

    double widest = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const double a = bearings[i].angle_to(bearings[j]);
        widest = std::max(widest, std::min(a, M_PI - a));
      }
    }
    if (widest < 1e-3) continue;  // all effectively parallel; resample
    AngleCondition cond;
    cond.theta0 = std::min(widest * 0.999, M_PI / 2.0 - 1e-6);
    cond.alpha0 = *std::min_element(w.begin(), w.end());
    const CheckResult one = pbar_lower_bound_check(bearings, w, cond);
    if (!one.applicable) continue;
    ++applicable;
    min_margin = std::min(min_margin, one.lhs - one.rhs);
  }
  CheckResult r;
  r.name = "pbar_lower_bound";
  r.inputs = {{"configs", configs}, {"seed", seed}, {"applicable", applicable}};
  r.lhs = min_margin;
  r.rhs = 0.0;
  r.applicable = applicable > 0;
  r.pass = r.applicable && min_margin >= -1e-12;
  r.note = "min of sigma_min(weighted sum) - alpha0 (1 - cos theta0)";
  return r;
}

inline CheckResult c_bound_check() {
  const SttParams p = theory_detail::quiet_params();
  const TransitionModel model(0.1);
  const AngleCondition cond;
  CheckResult r;
  r.name = "c_lower_bound";
  r.inputs = {{"c", p.c},           {"gamma1", p.gamma1},
              {"gamma2", p.gamma2}, {"sigma_nu", p.sigma_nu},
              {"dt", model.dt()},   {"theta0", cond.theta0},
              {"alpha0", cond.alpha0}};
  r.lhs = p.c;
  r.rhs = c_lower_bound(p, model, cond);
  r.pass = r.lhs >= r.rhs;
  r.note =
      "default gain vs its guarantee threshold at the noise-free "
      "verification level; the threshold scales with sigma_nu^2, so noisy "
      "configurations sit above the default gain and carry no guarantee";
  return r;
}

namespace theory_detail {

/// History whose per-step bearings always contain a pair wider than theta0,
/// with the gain set exactly at the guarantee threshold.
inline History feasible_history(uint64_t seed, int k_len,
                                const AngleCondition& cond) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(25.0, 35.0);
  std::uniform_real_distribution<double> vel(-1.0, 1.0);

  SttParams p;
  p.sigma_nu = 0.1;
  const TransitionModel model(0.1);
  p.c = c_lower_bound(p, model, cond);

  Vec6 truth;
  truth << pos(rng), pos(rng), 0.4 * pos(rng), vel(rng), vel(rng),
      0.3 * vel(rng);
  const auto stations = ring_stations(4, truth.head<3>(), rng);

  History h{0, model, p, {}, std::nullopt};
  StepWeights w;
  for (int j = 0; j < 4; ++j) {
    w.alpha[j] = 0.25;
    w.beta[j] = 0.25;
  }
  for (int t = 1; t <= k_len; ++t) {
    truth = model.apply(truth);
    StepRecord rec;
    rec.w = w;
    std::vector<Bearing> bearings;
    for (int j = 0; j < 4; ++j) {
      const Bearing g = unit_bearing(truth.head<3>(), stations[j]);
      bearings.push_back(g);
      NeighborMessage msg;
      msg.x_pred = Vec6::Zero();  // consensus part plays no role in the gram
      const PseudoMeasurement pm = pseudo_linearize(g, stations[j]);
      msg.z = pm.z;
      msg.H = pm.H;
      rec.packets[j] = msg;
    }
    bool pair_ok = false;
    for (size_t i = 0; i < bearings.size() && !pair_ok; ++i) {
      for (size_t j = i + 1; j < bearings.size() && !pair_ok; ++j) {
        const double a = bearings[i].angle_to(bearings[j]);
        pair_ok = a >= cond.theta0 && a <= M_PI - cond.theta0;
      }
    }
    if (!pair_ok) {
      throw NumericalError("ring geometry failed the angle condition");
    }
    h.steps.push_back(std::move(rec));
  }
  return h;
}

}  // namespace theory_detail

inline CheckResult gram_floor_check(uint64_t seed, int histories) {
  AngleCondition cond;
  cond.alpha0 = 0.25;
  double min_sigma = std::numeric_limits<double>::infinity();
  std::mt19937_64 seq(seed);
  for (int i = 0; i < histories; ++i) {
    const int k_len = 2 + static_cast<int>(seq() % 29);
    const History h = theory_detail::feasible_history(seq(), k_len, cond);
    min_sigma = std::min(min_sigma, gram_min_singular(h));
  }
  CheckResult r;
  r.name = "gram_lower_bound";
  r.inputs = {{"histories", histories}, {"seed", seed}, {"max_steps", 30},
              {"theta0", cond.theta0},  {"alpha0", cond.alpha0}};
  r.lhs = min_sigma;
  r.rhs = 1.0 - 1e-9;
  r.pass = r.lhs >= r.rhs;
  r.note = "min eigenvalue of the weighted normal matrix, gain at threshold";
  return r;
}

inline CheckResult gram_decomposition_check(uint64_t seed) {
  AngleCondition cond;
  cond.alpha0 = 0.25;
  const History h = theory_detail::feasible_history(seed, 12, cond);
  const int k = static_cast<int>(h.steps.size());
  const double norm_a = h.model.norm();
  const double r_scale = 1.0 / (h.params.sigma_nu * h.params.sigma_nu);

  Mat6 rebuilt = Mat6::Zero();
  for (int t = 1; t <= k; ++t) {
    const double lam = forgetting_factor(h.params, norm_a, k - t);
    Mat3 pbar = Mat3::Zero();
    for (const auto& [id, pkt] : h.steps[t - 1].packets) {
      pbar += h.steps[t - 1].w.alpha.at(id) *
              pkt.H.topLeftCorner<3, 3>();  // H carries the projection
    }
    const Eigen::Matrix2d f = f_matrix(t - k, h.model.dt());
    Mat6 kron = Mat6::Zero();
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        kron.block<3, 3>(3 * a, 3 * b) = f(a, b) * pbar;
      }
    }
    const Mat6 pull = h.model.power(t - k);
    rebuilt += lam * (h.params.c * r_scale * kron +
                      pull.transpose() * pull);
  }
  const Mat6 direct = normal_matrix(h, k);

  CheckResult r;
  r.name = "gram_decomposition";
  r.inputs = {{"seed", seed}, {"steps", k}};
  r.lhs = (direct - rebuilt).cwiseAbs().maxCoeff();
  r.rhs = 1e-10;
  r.pass = r.lhs <= r.rhs;
  r.note = "normal matrix vs its offset-factor x projection-sum form";
  return r;
}

/// Monte-Carlo consistency of the closed-form mean: the sample mean of the
/// one-step solve under measurement noise must match the noise-free solve
/// within 3 standard errors per component.
inline CheckResult mean_estimate_check(uint64_t seed, int draws) {
  const double sigma_g = 0.01, sigma_s = 0.01;
  const TransitionModel model(0.1);
  SttParams p;
  p.sigma_nu = std::sqrt(sigma_s * sigma_s + 900.0 * sigma_g * sigma_g);

  const Vec3 target(30, 25, 10);
  const std::vector<Vec3> stations = {Vec3(0, 0, 5), Vec3(60, 0, 15),
                                      Vec3(30, 60, 35)};
  StepWeights w;
  std::vector<Vec6> x_pred(3);
  for (int j = 0; j < 3; ++j) {
    w.alpha[j] = 1.0 / 3.0;
    w.beta[j] = 1.0 / 3.0;
    Vec6 x0 = Vec6::Zero();
    x0.head<3>() = stations[j];
    x_pred[j] = model.apply(x0);
  }

  auto one_step_solve = [&](const std::vector<PseudoMeasurement>& obs) {
    History h{0, model, p, {}, std::nullopt};
    StepRecord rec;
    rec.w = w;
    for (int j = 0; j < 3; ++j) {
      NeighborMessage msg;
      msg.x_pred = x_pred[j];
      msg.z = obs[j].z;
      msg.H = obs[j].H;
      rec.packets[j] = msg;
    }
    h.steps.push_back(std::move(rec));
    return batch_solve(h, 1);
  };

  std::vector<PseudoMeasurement> clean;
  for (int j = 0; j < 3; ++j) {
    clean.push_back(
        pseudo_linearize(unit_bearing(target, stations[j]), stations[j]));
  }
  const Vec6 reference = one_step_solve(clean);

  std::mt19937_64 rng(seed);
  Vec6 sum = Vec6::Zero();
  Vec6 sum_sq = Vec6::Zero();
  for (int d = 0; d < draws; ++d) {
    std::vector<PseudoMeasurement> noisy;
    for (int j = 0; j < 3; ++j) {
      const BearingObservation o =
          observe(target, stations[j], sigma_g, sigma_s, rng);
      noisy.push_back(pseudo_linearize(o.g, o.s));
    }
    const Vec6 x = one_step_solve(noisy);
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  const Vec6 mean = sum / draws;
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double var =
        (sum_sq(i) - draws * mean(i) * mean(i)) / (draws - 1.0);
    const double se = std::sqrt(std::max(var, 0.0) / draws);
    worst = std::max(worst, std::abs(mean(i) - reference(i)) /
                                std::max(se, 1e-300));
  }
  CheckResult r;
  r.name = "mean_estimate_consistency";
  r.inputs = {{"draws", draws},
              {"seed", seed},
              {"sigma_g", sigma_g},
              {"sigma_s", sigma_s}};
  r.lhs = worst;
  r.rhs = 3.0;
  r.pass = r.lhs <= r.rhs;
  r.note = "max standardized deviation of the sample mean from the "
           "noise-free one-step solve";
  return r;
}

inline CheckResult deterministic_decay_check() {
  const std::vector<Vec3> stations = {Vec3(30, 0, 5), Vec3(0, 30, 5),
                                      Vec3(0, 0, 35)};
  NeighborSets nbrs = {{1, 2}, {0, 2}, {0, 1}};
  Vec6 truth0;
  truth0 << 0, 0, 5, 0, 0, 0;
  theory_detail::SyncWorld w(TransitionModel(0.1),
                             theory_detail::quiet_params(), stations, nbrs,
                             truth0);
  const double bound = (1.0 + w.p.gamma2) / (1.0 + w.p.gamma1);
  std::vector<double> env;
  for (int k = 0; k < 200; ++k) {
    w.round();
    env.push_back(w.envelope());
  }
  double worst_ratio = 0.0;
  for (size_t k = 6; k < env.size(); ++k) {
    if (env[k - 1] > 1e-10) {
      worst_ratio = std::max(worst_ratio, env[k] / env[k - 1]);
    }
  }
  CheckResult r;
  r.name = "deterministic_decay";
  r.inputs = {{"steps", 200}, {"observers", 3}};
  r.lhs = worst_ratio;
  r.rhs = bound + 0.05;
  const double final_pos = w.position_envelope();
  r.pass = r.lhs <= r.rhs && final_pos < 1e-3;
  r.note = "worst per-step envelope ratio after burn-in; final position "
           "envelope " +
           std::to_string(final_pos);
  return r;
}

inline CheckResult monte_carlo_decay_check(uint64_t seed) {
  const auto env = decay_trial_envelopes(100, 60, seed);
  SttParams p;  // default gains
  return decay_rate_check(env, p.gamma1, p.gamma2, 10);
}

/// Runs the named checks (all of them when the list is empty) in a fixed
/// order. The default seed base makes repeated verification emit identical
/// output; passing another base re-randomizes the sampled checks.
inline std::vector<CheckResult> run_verification(
    const std::vector<std::string>& names = {}, uint64_t seed_base = 2023) {
  const std::vector<
      std::pair<std::string, std::function<CheckResult()>>>
      all = {
          {"projection_pair_sigma_min",
           [&] { return projection_pair_check(seed_base + 1, 1000); }},
          {"pbar_lower_bound",
           [&] { return pbar_randomized_check(seed_base + 2, 10); }},
          {"f_delta_closed_form", [] { return f_delta_check(); }},
          {"c_lower_bound", [] { return c_bound_check(); }},
          {"gram_lower_bound",
           [&] { return gram_floor_check(seed_base + 3, 100); }},
          {"gram_decomposition",
           [&] { return gram_decomposition_check(seed_base + 4); }},
          {"mean_estimate_consistency",
           [&] { return mean_estimate_check(seed_base + 5, 10000); }},
          {"decay_rate", [&] { return monte_carlo_decay_check(seed_base + 6); }},
          {"deterministic_decay", [] { return deterministic_decay_check(); }},
      };
  std::vector<CheckResult> out;
  if (names.empty()) {
    out.reserve(all.size());
    for (const auto& [_, fn] : all) out.push_back(fn());
    return out;
  }
  for (const std::string& want : names) {
    bool found = false;
    for (const auto& [name, fn] : all) {
      if (name == want) {
        out.push_back(fn());
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown check name: " + want);
  }
  return out;
}

}  // namespace stt
