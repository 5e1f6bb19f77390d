#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stt/baselines.hpp"
#include "stt/world.hpp"

namespace stt {

// Trial execution and benchmarking: everything between a ScenarioConfig and
// the numbers a user actually looks at.

enum class Filter { Stt, Ckf, Plkf };

inline const char* filter_name(Filter f) {
  switch (f) {
    case Filter::Stt: return "stt";
    case Filter::Ckf: return "ckf";
    default: return "plkf";
  }
}

inline Filter filter_from_name(const std::string& s) {
  if (s == "stt") return Filter::Stt;
  if (s == "ckf") return Filter::Ckf;
  if (s == "plkf") return Filter::Plkf;
  throw ConfigError("unknown filter name: " + s);
}

/// Per-trial seed derivation (SplitMix-style avalanche), so trial streams
/// stay decorrelated no matter how close the master seeds sit.
inline uint64_t mix_seed(uint64_t master, uint64_t index) {
  uint64_t z = master + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Fallback seed when neither the CLI nor the config provides one: a hash
/// of the canonical config serialization, so the same config always maps to
/// the same run.
inline uint64_t config_seed(const ScenarioConfig& cfg) {
  return fnv1a64(config_to_json(cfg).dump());
}

/// Everything random a trial consumes, drawn up front in one documented
/// order: observer placement, then per step the observations (observer 0
/// first), the step's graph when it is not static, and finally the delivery
/// coin flips. Pre-generating lets several filters consume identical noise.
struct TrialData {
  std::vector<Vec3> stations;
  std::vector<TargetState> truth;                    // truth[k-1] is step k
  NeighborSets static_graph;
  std::vector<NeighborSets> step_graphs;             // only when graph varies
  std::vector<std::vector<BearingObservation>> obs;  // [k-1][observer]
  std::vector<std::vector<std::vector<char>>> delivered;  // empty: all arrive

  const std::vector<int>& neighbors(int step_index, int i) const {
    return step_graphs.empty() ? static_graph[i] : step_graphs[step_index][i];
  }
  bool arrived(int step_index, int i, size_t slot) const {
    return delivered.empty() ||
           delivered[step_index][i][slot] != 0;
  }
};

inline TrialData make_trial_data(const ScenarioConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  TrialData d;
  d.stations = place_observers(cfg.region, cfg.n, rng);
  d.static_graph = knn_graph(d.stations, cfg.graph.k);
  d.truth.reserve(cfg.horizon);
  d.obs.reserve(cfg.horizon);

  for (int k = 1; k <= cfg.horizon; ++k) {
    d.truth.push_back(trajectory_state(cfg.trajectory, k, cfg.dt));
    std::vector<BearingObservation> row;
    row.reserve(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
      row.push_back(observe(d.truth.back().p, d.stations[i],
                            cfg.bearing_sigma, cfg.position_sigma, rng));
    }
    d.obs.push_back(std::move(row));

    if (!cfg.graph.static_per_trial) {
      NeighborSets g(cfg.n);
      for (int i = 0; i < cfg.n; ++i) {
        std::vector<int> others;
        others.reserve(cfg.n - 1);
        for (int j = 0; j < cfg.n; ++j) {
          if (j != i) others.push_back(j);
        }
        for (int m = 0; m < cfg.graph.k; ++m) {
          const size_t pick = m + rng() % (others.size() - m);
          std::swap(others[m], others[pick]);
        }
        g[i].assign(others.begin(), others.begin() + cfg.graph.k);
        std::sort(g[i].begin(), g[i].end());
      }
      d.step_graphs.push_back(std::move(g));
    }

    if (cfg.graph.drop_prob > 0.0) {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::vector<std::vector<char>> row_mask(cfg.n);
      for (int i = 0; i < cfg.n; ++i) {
        const auto& nbrs = d.neighbors(k - 1, i);
        row_mask[i].resize(nbrs.size());
        for (size_t s = 0; s < nbrs.size(); ++s) {
          row_mask[i][s] = coin(rng) >= cfg.graph.drop_prob ? 1 : 0;
        }
      }
      d.delivered.push_back(std::move(row_mask));
    }
  }
  return d;
}

/// Step-indexed record of one run: ground truth next to every estimate
/// column (one per observer, or a single column for the centralized
/// filter), plus the packets each observer broadcast when applicable.
struct TrialTrace {
  double dt = 0.1;
  Filter filter = Filter::Stt;
  int columns = 0;
  std::vector<TargetState> truth;
  std::vector<std::vector<Vec6>> estimates;            // [step][column]
  std::vector<std::vector<NeighborMessage>> messages;  // [step][observer]
};

inline TrialTrace run_on_data(const ScenarioConfig& cfg, const TrialData& d,
                              Filter which) {
  const TransitionModel model(cfg.dt);
  const int horizon = static_cast<int>(d.truth.size());
  const int n = cfg.n;

  TrialTrace tr;
  tr.dt = cfg.dt;
  tr.filter = which;
  tr.columns = which == Filter::Ckf ? 1 : n;
  tr.truth = d.truth;
  tr.estimates.reserve(horizon);

  if (which == Filter::Stt) {
    tr.messages.reserve(horizon);
    std::vector<EstimatorState> states(n);
    for (int i = 0; i < n; ++i) states[i].x.head<3>() = d.stations[i];

    for (int k = 0; k < horizon; ++k) {
      std::vector<PseudoMeasurement> pms;
      pms.reserve(n);
      std::vector<NeighborMessage> casts;
      casts.reserve(n);
      for (int i = 0; i < n; ++i) {
        pms.push_back(pseudo_linearize(d.obs[k][i].g, d.obs[k][i].s));
        casts.push_back(make_message(states[i], model, pms[i]));
      }
      std::vector<EstimatorState> next(n);
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = d.neighbors(k, i);
        std::map<int, NeighborMessage> inbox;
        std::vector<int> present = {i};
        for (size_t s = 0; s < nbrs.size(); ++s) {
          if (d.arrived(k, i, s)) {
            inbox[nbrs[s]] = casts[nbrs[s]];
            present.push_back(nbrs[s]);
          }
        }
        StepWeights w = equal_weights(i, nbrs);
        if (inbox.size() != nbrs.size()) w = restrict_weights(w, present);
        next[i] = step(states[i], model, cfg.estimator, pms[i], inbox, w, i)
                      .state;
      }
      states = std::move(next);
      std::vector<Vec6> row(n);
      for (int i = 0; i < n; ++i) row[i] = states[i].x;
      tr.estimates.push_back(std::move(row));
      tr.messages.push_back(std::move(casts));
    }
    return tr;
  }

  const Mat6 q = cwna_process_noise(cfg.dt, cfg.baseline.q);
  if (which == Filter::Ckf) {
    Vec3 mean = Vec3::Zero();
    for (const auto& s : d.stations) mean += s;
    mean /= static_cast<double>(n);
    CkfState state = ckf_init(mean, q, cfg.estimator.sigma_nu,
                              cfg.baseline.init_pos_sigma,
                              cfg.baseline.init_vel_sigma);
    for (int k = 0; k < horizon; ++k) {
      std::vector<PseudoMeasurement> pms;
      pms.reserve(n);
      for (int i = 0; i < n; ++i) {
        pms.push_back(pseudo_linearize(d.obs[k][i].g, d.obs[k][i].s));
      }
      state = ckf_step(state, model, pms);
      tr.estimates.push_back({state.x});
    }
    return tr;
  }

  std::vector<CkfState> states;
  states.reserve(n);
  for (int i = 0; i < n; ++i) {
    states.push_back(ckf_init(d.stations[i], q, cfg.estimator.sigma_nu,
                              cfg.baseline.init_pos_sigma,
                              cfg.baseline.init_vel_sigma));
  }
  for (int k = 0; k < horizon; ++k) {
    std::vector<Vec6> row(n);
    for (int i = 0; i < n; ++i) {
      states[i] = plkf_step(states[i], model,
                            pseudo_linearize(d.obs[k][i].g, d.obs[k][i].s));
      row[i] = states[i].x;
    }
    tr.estimates.push_back(std::move(row));
  }
  return tr;
}

inline TrialTrace run_trial(const ScenarioConfig& cfg, uint64_t seed,
                            Filter which = Filter::Stt) {
  return run_on_data(cfg, make_trial_data(cfg, seed), which);
}

// --- RMSE aggregation --------------------------------------------------------
//
// Per-step RMSE pools every (observer, trial) pair:
//   rmse[k] = sqrt( sum over trials, columns of |err|^2 / (trials columns) ).
// The steady-state scalar pools the same squares over all steps at or past
// floor(burn_in_fraction * horizon).

struct RmseReport {
  int trials = 0;
  int columns = 0;
  double dt = 0.1;
  int steady_start = 0;
  std::vector<double> pos_rmse;
  std::vector<double> vel_rmse;
  double steady_pos_rmse = 0.0;
  double steady_vel_rmse = 0.0;
};

namespace harness_detail {

struct StepSums {
  std::vector<double> pos;
  std::vector<double> vel;
  int columns = 0;
};

inline StepSums trace_step_sums(const TrialTrace& tr) {
  StepSums s;
  s.columns = tr.columns;
  s.pos.resize(tr.truth.size(), 0.0);
  s.vel.resize(tr.truth.size(), 0.0);
  for (size_t k = 0; k < tr.truth.size(); ++k) {
    for (const Vec6& est : tr.estimates[k]) {
      s.pos[k] += (est.head<3>() - tr.truth[k].p).squaredNorm();
      s.vel[k] += (est.tail<3>() - tr.truth[k].v).squaredNorm();
    }
  }
  return s;
}

struct Accumulator {
  std::vector<double> pos_sq;
  std::vector<double> vel_sq;
  int trials = 0;
  int columns = 0;
  double dt = 0.1;

  void add(const StepSums& s) {
    if (trials == 0) {
      pos_sq.assign(s.pos.size(), 0.0);
      vel_sq.assign(s.vel.size(), 0.0);
      columns = s.columns;
    } else if (s.pos.size() != pos_sq.size() || s.columns != columns) {
      throw ConfigError("trials disagree on horizon or estimate count");
    }
    for (size_t k = 0; k < pos_sq.size(); ++k) {
      pos_sq[k] += s.pos[k];
      vel_sq[k] += s.vel[k];
    }
    ++trials;
  }

  RmseReport finish(double burn_in_fraction) const {
    RmseReport r;
    r.trials = trials;
    r.columns = columns;
    r.dt = dt;
    const size_t horizon = pos_sq.size();
    const double denom = static_cast<double>(trials) * columns;
    r.pos_rmse.reserve(horizon);
    r.vel_rmse.reserve(horizon);
    for (size_t k = 0; k < horizon; ++k) {
      r.pos_rmse.push_back(std::sqrt(pos_sq[k] / denom));
      r.vel_rmse.push_back(std::sqrt(vel_sq[k] / denom));
    }
    r.steady_start = static_cast<int>(burn_in_fraction * horizon);
    double ps = 0.0, vs = 0.0;
    for (size_t k = r.steady_start; k < horizon; ++k) {
      ps += pos_sq[k];
      vs += vel_sq[k];
    }
    const double steps = static_cast<double>(horizon) - r.steady_start;
    if (steps > 0) {
      r.steady_pos_rmse = std::sqrt(ps / (denom * steps));
      r.steady_vel_rmse = std::sqrt(vs / (denom * steps));
    }
    return r;
  }
};

/// Runs fn(t) for t in [0, trials) across a small pool, then reduces in
/// trial order so the result is bitwise independent of the thread count.
template <typename Fn>
std::vector<StepSums> pooled_sums(int trials, int threads, Fn&& fn) {
  std::vector<StepSums> parts(trials);
  if (threads <= 1) {
    for (int t = 0; t < trials; ++t) parts[t] = fn(t);
    return parts;
  }
  threads = std::min(threads, trials);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int t = w; t < trials; t += threads) parts[t] = fn(t);
    });
  }
  for (auto& th : pool) th.join();
  return parts;
}

}  // namespace harness_detail

inline RmseReport summarize(const std::vector<TrialTrace>& traces,
                            double burn_in_fraction) {
  if (traces.empty()) throw ConfigError("summarize needs at least one trace");
  harness_detail::Accumulator acc;
  acc.dt = traces.front().dt;
  for (const auto& tr : traces) {
    acc.add(harness_detail::trace_step_sums(tr));
  }
  return acc.finish(burn_in_fraction);
}

inline RmseReport monte_carlo(const ScenarioConfig& cfg, int trials,
                              uint64_t seed, Filter which = Filter::Stt,
                              int threads = 1) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  cfg.validate();
  auto parts = harness_detail::pooled_sums(trials, threads, [&](int t) {
    return harness_detail::trace_step_sums(
        run_trial(cfg, mix_seed(seed, t), which));
  });
  harness_detail::Accumulator acc;
  acc.dt = cfg.dt;
  for (const auto& p : parts) acc.add(p);
  return acc.finish(cfg.burn_in_fraction);
}

// --- Baseline comparison and noise sweep --------------------------------------

struct CompareReport {
  RmseReport stt;
  RmseReport ckf;
  RmseReport plkf;
};

/// All three filters consume the same pre-drawn noise per trial, so RMSE
/// differences come from the estimators rather than from sampling luck.
inline CompareReport compare(const ScenarioConfig& cfg, int trials,
                             uint64_t seed, int threads = 1) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  cfg.validate();
  struct Triple {
    harness_detail::StepSums stt, ckf, plkf;
  };
  std::vector<Triple> parts(trials);
  auto one = [&](int t) {
    const TrialData data = make_trial_data(cfg, mix_seed(seed, t));
    Triple out;
    out.stt = harness_detail::trace_step_sums(
        run_on_data(cfg, data, Filter::Stt));
    out.ckf = harness_detail::trace_step_sums(
        run_on_data(cfg, data, Filter::Ckf));
    out.plkf = harness_detail::trace_step_sums(
        run_on_data(cfg, data, Filter::Plkf));
    return out;
  };
  if (threads <= 1) {
    for (int t = 0; t < trials; ++t) parts[t] = one(t);
  } else {
    const int workers = std::min(threads, trials);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int t = w; t < trials; t += workers) parts[t] = one(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  harness_detail::Accumulator a_stt, a_ckf, a_plkf;
  a_stt.dt = a_ckf.dt = a_plkf.dt = cfg.dt;
  for (const auto& p : parts) {
    a_stt.add(p.stt);
    a_ckf.add(p.ckf);
    a_plkf.add(p.plkf);
  }
  CompareReport r;
  r.stt = a_stt.finish(cfg.burn_in_fraction);
  r.ckf = a_ckf.finish(cfg.burn_in_fraction);
  r.plkf = a_plkf.finish(cfg.burn_in_fraction);
  return r;
}

/// Average ranks with ties sharing their midpoint, then Pearson on ranks.
inline double spearman_rho(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ConfigError("rank correlation needs two same-length samples");
  }
  auto ranks = [](const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double shared = 0.5 * (i + j) + 1.0;
      for (size_t m = i; m <= j; ++m) r[order[m]] = shared;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct SweepPoint {
  double sigma = 0.0;
  RmseReport report;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  double spearman_pos = 0.0;
  double spearman_vel = 0.0;
};

/// Reruns the scenario at each bearing-noise level with the same master
/// seed (common random numbers across points). The estimator's sigma_nu is
/// re-derived from each level so its measurement weighting tracks the
/// injected noise, mirroring how the default weight is derived.
inline SweepReport sweep_noise(const ScenarioConfig& cfg,
                               const std::vector<double>& sigmas, int trials,
                               uint64_t seed, Filter which = Filter::Stt,
                               int threads = 1) {
  if (sigmas.size() < 2) throw ConfigError("sweep needs at least two sigmas");
  for (size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] >= 0.0)) throw ConfigError("sweep sigmas must be >= 0");
    if (i > 0 && sigmas[i] <= sigmas[i - 1]) {
      throw ConfigError("sweep sigmas must be strictly increasing");
    }
  }
  SweepReport out;
  out.points.reserve(sigmas.size());
  for (double sigma : sigmas) {
    ScenarioConfig point = cfg;
    point.bearing_sigma = sigma;
    const double derived =
        std::sqrt(point.position_sigma * point.position_sigma +
                  point.nominal_range * point.nominal_range * sigma * sigma);
    if (derived > 0.0) point.estimator.sigma_nu = derived;
    out.points.push_back({sigma, monte_carlo(point, trials, seed, which,
                                             threads)});
  }
  std::vector<double> pos, vel;
  for (const auto& p : out.points) {
    pos.push_back(p.report.steady_pos_rmse);
    vel.push_back(p.report.steady_vel_rmse);
  }
  out.spearman_pos = spearman_rho(sigmas, pos);
  out.spearman_vel = spearman_rho(sigmas, vel);
  return out;
}

// --- Export -------------------------------------------------------------------
//
// CSV doubles use %.17g so a written value reparses to the identical bits.

namespace harness_detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace harness_detail

inline std::string trace_csv_header(int columns) {
  std::string h = "step,t_seconds,truth_px,truth_py,truth_pz,truth_vx,truth_vy,truth_vz";
  for (int i = 0; i < columns; ++i) {
    const std::string tag = "est" + std::to_string(i);
    for (const char* axis : {"_px", "_py", "_pz", "_vx", "_vy", "_vz"}) {
      h += "," + tag + axis;
    }
    h += ",err" + std::to_string(i) + "_pos";
    h += ",err" + std::to_string(i) + "_vel";
  }
  return h;
}

inline void write_trace_csv(std::ostream& os, const TrialTrace& tr) {
  using harness_detail::fmt;
  os << trace_csv_header(tr.columns) << "\n";
  for (size_t k = 0; k < tr.truth.size(); ++k) {
    os << (k + 1) << "," << fmt((k + 1) * tr.dt);
    for (int a = 0; a < 3; ++a) os << "," << fmt(tr.truth[k].p(a));
    for (int a = 0; a < 3; ++a) os << "," << fmt(tr.truth[k].v(a));
    for (const Vec6& est : tr.estimates[k]) {
      for (int a = 0; a < 6; ++a) os << "," << fmt(est(a));
      os << "," << fmt((est.head<3>() - tr.truth[k].p).norm());
      os << "," << fmt((est.tail<3>() - tr.truth[k].v).norm());
    }
    os << "\n";
  }
}

inline nlohmann::json trace_to_json(const TrialTrace& tr) {
  nlohmann::json steps = nlohmann::json::array();
  for (size_t k = 0; k < tr.truth.size(); ++k) {
    nlohmann::json row;
    row["step"] = k + 1;
    row["t_seconds"] = (k + 1) * tr.dt;
    row["truth_p"] = {tr.truth[k].p(0), tr.truth[k].p(1), tr.truth[k].p(2)};
    row["truth_v"] = {tr.truth[k].v(0), tr.truth[k].v(1), tr.truth[k].v(2)};
    nlohmann::json ests = nlohmann::json::array();
    for (const Vec6& est : tr.estimates[k]) {
      nlohmann::json e;
      e["x"] = {est(0), est(1), est(2), est(3), est(4), est(5)};
      e["err_pos"] = (est.head<3>() - tr.truth[k].p).norm();
      e["err_vel"] = (est.tail<3>() - tr.truth[k].v).norm();
      ests.push_back(std::move(e));
    }
    row["estimates"] = std::move(ests);
    if (!tr.messages.empty()) {
      nlohmann::json msgs = nlohmann::json::array();
      for (const NeighborMessage& m : tr.messages[k]) {
        msgs.push_back(m.to_array());
      }
      row["messages"] = std::move(msgs);
    }
    steps.push_back(std::move(row));
  }
  return {{"kind", "trial_trace"},
          {"filter", filter_name(tr.filter)},
          {"dt", tr.dt},
          {"columns", tr.columns},
          {"steps", std::move(steps)}};
}

inline nlohmann::json report_to_json(const RmseReport& r) {
  return {{"kind", "rmse_report"},
          {"trials", r.trials},
          {"columns", r.columns},
          {"dt", r.dt},
          {"steady_start", r.steady_start},
          {"steady_pos_rmse", r.steady_pos_rmse},
          {"steady_vel_rmse", r.steady_vel_rmse},
          {"pos_rmse", r.pos_rmse},
          {"vel_rmse", r.vel_rmse}};
}

inline RmseReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "rmse_report") {
      throw ConfigError("not an rmse_report document");
    }
    RmseReport r;
    r.trials = j.at("trials").get<int>();
    r.columns = j.at("columns").get<int>();
    r.dt = j.at("dt").get<double>();
    r.steady_start = j.at("steady_start").get<int>();
    r.steady_pos_rmse = j.at("steady_pos_rmse").get<double>();
    r.steady_vel_rmse = j.at("steady_vel_rmse").get<double>();
    r.pos_rmse = j.at("pos_rmse").get<std::vector<double>>();
    r.vel_rmse = j.at("vel_rmse").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed rmse_report: ") + e.what());
  }
}

inline void write_report_csv(std::ostream& os, const RmseReport& r) {
  using harness_detail::fmt;
  os << "step,t_seconds,pos_rmse,vel_rmse\n";
  for (size_t k = 0; k < r.pos_rmse.size(); ++k) {
    os << (k + 1) << "," << fmt((k + 1) * r.dt) << "," << fmt(r.pos_rmse[k])
       << "," << fmt(r.vel_rmse[k]) << "\n";
  }
}

inline nlohmann::json compare_to_json(const CompareReport& r) {
  return {{"kind", "compare_report"},
          {"stt", report_to_json(r.stt)},
          {"ckf", report_to_json(r.ckf)},
          {"plkf", report_to_json(r.plkf)}};
}

inline void write_compare_csv(std::ostream& os, const CompareReport& r) {
  using harness_detail::fmt;
  os << "step,t_seconds,stt_pos_rmse,stt_vel_rmse,ckf_pos_rmse,ckf_vel_rmse,"
        "plkf_pos_rmse,plkf_vel_rmse\n";
  for (size_t k = 0; k < r.stt.pos_rmse.size(); ++k) {
    os << (k + 1) << "," << fmt((k + 1) * r.stt.dt) << ","
       << fmt(r.stt.pos_rmse[k]) << "," << fmt(r.stt.vel_rmse[k]) << ","
       << fmt(r.ckf.pos_rmse[k]) << "," << fmt(r.ckf.vel_rmse[k]) << ","
       << fmt(r.plkf.pos_rmse[k]) << "," << fmt(r.plkf.vel_rmse[k]) << "\n";
  }
}

inline nlohmann::json sweep_to_json(const SweepReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"sigma", p.sigma}, {"report", report_to_json(p.report)}});
  }
  return {{"kind", "sweep_report"},
          {"spearman_pos", r.spearman_pos},
          {"spearman_vel", r.spearman_vel},
          {"points", std::move(pts)}};
}

inline void write_sweep_csv(std::ostream& os, const SweepReport& r) {
  using harness_detail::fmt;
  os << "sigma,steady_pos_rmse,steady_vel_rmse\n";
  for (const auto& p : r.points) {
    os << fmt(p.sigma) << "," << fmt(p.report.steady_pos_rmse) << ","
       << fmt(p.report.steady_vel_rmse) << "\n";
  }
}

}  // namespace stt
