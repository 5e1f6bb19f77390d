#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stt/estimator.hpp"

namespace stt {

// Scenario generation: ground-truth trajectories, observer placement,
// communication graphs, and measurement noise injection.

struct CubeRegion {
  Vec3 lo{0, 0, 0};
  Vec3 hi{60, 60, 40};

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// Planar circular arc: v(t) = speed [sin(t/ts), cos(t/ts), 0], integrated
/// in closed form from p0.
struct CircleSpec {
  Vec3 p0{15, 0, 5};
  double speed = 5.0;
  double time_scale = 10.0 * M_PI;
};

/// Piecewise-constant velocity that starts at v0 and rotates -90 degrees
/// about +z every turn_period seconds (a clockwise square when viewed from
/// above).
struct SquareSpec {
  Vec3 p0{20, 20, 5};
  Vec3 v0{0, -6, 0};
  double turn_period = 6.0;
};

/// Piecewise-linear interpolation through (t, p) knots; the first/last
/// segment velocity extends beyond the knot range.
struct WaypointSpec {
  std::vector<std::pair<double, Vec3>> points;
};

using TrajectorySpec = std::variant<CircleSpec, SquareSpec, WaypointSpec>;

inline TargetState trajectory_state(const CircleSpec& c, double t) {
  const double phase = t / c.time_scale;
  TargetState s;
  s.v = c.speed * Vec3(std::sin(phase), std::cos(phase), 0.0);
  s.p = c.p0 + c.speed * c.time_scale *
                   Vec3(1.0 - std::cos(phase), std::sin(phase), 0.0);
  return s;
}

inline TargetState trajectory_state(const SquareSpec& c, double t) {
  // Quarter-turn about +z applied exactly: (x, y) -> (y, -x).
  auto heading = [&](long seg) {
    Vec3 v = c.v0;
    for (long r = 0; r < ((seg % 4) + 4) % 4; ++r) {
      v = Vec3(v.y(), -v.x(), v.z());
    }
    return v;
  };
  // Guard so step times within fp jitter of a corner land in the new leg.
  const long seg = static_cast<long>(std::floor(t / c.turn_period + 1e-9));
  const double within = t - static_cast<double>(seg) * c.turn_period;
  TargetState s;
  s.v = heading(seg);
  // Full four-leg cycles cancel exactly, so only seg % 4 legs contribute.
  s.p = c.p0 + within * s.v;
  for (long r = 0; r < ((seg % 4) + 4) % 4; ++r) {
    s.p += c.turn_period * heading(r);
  }
  return s;
}

inline TargetState trajectory_state(const WaypointSpec& c, double t) {
  if (c.points.size() < 2) {
    throw ConfigError("waypoint trajectory needs at least two points");
  }
  size_t i = 0;
  while (i + 2 < c.points.size() && t >= c.points[i + 1].first) ++i;
  const auto& [t0, p0] = c.points[i];
  const auto& [t1, p1] = c.points[i + 1];
  TargetState s;
  s.v = (p1 - p0) / (t1 - t0);
  s.p = p0 + (t - t0) * s.v;
  return s;
}

/// Ground truth at step k: a pure function of (k, dt), no hidden state.
inline TargetState trajectory_state(const TrajectorySpec& spec, int k,
                                    double dt) {
  if (k < 0) throw ConfigError("trajectory step index must be >= 0");
  const double t = k * dt;
  return std::visit([&](const auto& c) { return trajectory_state(c, t); },
                    spec);
}

struct GraphConfig {
  int k = 3;
  bool static_per_trial = true;
  double drop_prob = 0.0;
};

/// In-neighbor lists: out[i] holds who observer i listens to.
using NeighborSets = std::vector<std::vector<int>>;

/// K nearest others by Euclidean distance; equidistant candidates resolve
/// to the lower id. Neighbor lists come back sorted by id.
inline NeighborSets knn_graph(const std::vector<Vec3>& positions, int k) {
  const int n = static_cast<int>(positions.size());
  if (k < 0 || k >= n) {
    throw ConfigError("knn graph needs 0 <= K < n");
  }
  NeighborSets out(n);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> d;
    d.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j != i) d.push_back({(positions[i] - positions[j]).norm(), j});
    }
    std::sort(d.begin(), d.end());
    out[i].reserve(k);
    for (int m = 0; m < k; ++m) out[i].push_back(d[m].second);
    std::sort(out[i].begin(), out[i].end());
  }
  return out;
}

/// Uniform placement inside the region, axis by axis, observer by observer.
inline std::vector<Vec3> place_observers(const CubeRegion& region, int n,
                                         std::mt19937_64& rng) {
  std::vector<Vec3> out(n);
  std::uniform_real_distribution<double> ux(region.lo.x(), region.hi.x());
  std::uniform_real_distribution<double> uy(region.lo.y(), region.hi.y());
  std::uniform_real_distribution<double> uz(region.lo.z(), region.hi.z());
  for (auto& p : out) {
    const double x = ux(rng);
    const double y = uy(rng);
    const double z = uz(rng);
    p << x, y, z;
  }
  return out;
}

/// What one observer actually sees: a perturbed bearing and its own noisy
/// position. Draw order per observation: bearing first (two variates when
/// sigma_g > 0), then three position variates when sigma_s > 0.
struct BearingObservation {
  Bearing g;
  Vec3 s;
};

inline BearingObservation observe(const Vec3& target, const Vec3& observer,
                                  double sigma_g, double sigma_s,
                                  std::mt19937_64& rng) {
  if (sigma_s < 0.0 || !std::isfinite(sigma_s)) {
    throw ConfigError("position noise sigma must be finite and >= 0");
  }
  const Bearing g = perturb_bearing(unit_bearing(target, observer), sigma_g, rng);
  Vec3 s = observer;
  if (sigma_s > 0.0) {
    std::normal_distribution<double> n(0.0, sigma_s);
    const double dx = n(rng);
    const double dy = n(rng);
    const double dz = n(rng);
    s += Vec3(dx, dy, dz);
  }
  return {g, s};
}

struct BaselineConfig {
  double q = 1.0;              // white-noise-acceleration intensity, m^2/s^3
  double init_pos_sigma = 30.0;
  double init_vel_sigma = 5.0;
};

struct ScenarioConfig {
  int n = 10;
  double dt = 0.1;
  int horizon = 1000;
  std::optional<uint64_t> seed;
  CubeRegion region;
  TrajectorySpec trajectory = CircleSpec{};
  double bearing_sigma = 0.1;
  double position_sigma = 0.0;
  GraphConfig graph;
  SttParams estimator;
  double nominal_range = 30.0;  // feeds the sigma_nu default
  BaselineConfig baseline;
  double burn_in_fraction = 0.2;  // leading fraction excluded from summary RMSE

  void validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
    if (horizon < 0) throw ConfigError("horizon must be >= 0");
    if (graph.k < 0 || graph.k >= n) throw ConfigError("graph.k must satisfy 0 <= K < n");
    if (graph.drop_prob < 0.0 || graph.drop_prob > 1.0) {
      throw ConfigError("graph.drop_prob must lie in [0, 1]");
    }
    if (bearing_sigma < 0.0 || position_sigma < 0.0) {
      throw ConfigError("noise sigmas must be >= 0");
    }
    if (!(region.lo.array() < region.hi.array()).all()) {
      throw ConfigError("region.min must be strictly below region.max");
    }
    if (burn_in_fraction < 0.0 || burn_in_fraction >= 1.0) {
      throw ConfigError("burn_in_fraction must lie in [0, 1)");
    }
    if (nominal_range <= 0.0) throw ConfigError("nominal_range must be > 0");
    if (baseline.q <= 0.0 || baseline.init_pos_sigma <= 0.0 ||
        baseline.init_vel_sigma <= 0.0) {
      throw ConfigError("baseline tuning values must be > 0");
    }
    estimator.validate();
  }
};

// --- JSON (de)serialization -------------------------------------------------
//
// Strict schema: unknown keys anywhere are rejected with their full path.
// Every field is optional and falls back to the defaults above. When
// estimator.sigma_nu is absent it is derived as
// sqrt(position_sigma^2 + nominal_range^2 bearing_sigma^2).

namespace cfg_detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config: " + path + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw ConfigError("config: unknown key '" +
                        (path.empty() ? key : path + "." + key) + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + path + key + "' has the wrong type");
  }
}

inline Vec3 get_vec3(const json& j, const std::string& path, const char* key,
                     const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3 || !a[0].is_number() ||
      !a[1].is_number() || !a[2].is_number()) {
    throw ConfigError("config: field '" + path + key +
                      "' must be an array of 3 numbers");
  }
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

}  // namespace cfg_detail

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using cfg_detail::check_keys;
  using cfg_detail::get_or;
  using cfg_detail::get_vec3;
  using nlohmann::json;

  check_keys(j, "",
             {"n", "dt", "horizon", "seed", "region", "trajectory", "noise",
              "graph", "estimator", "nominal_range", "baseline",
              "burn_in_fraction"});
  ScenarioConfig c;
  c.n = get_or(j, "", "n", c.n);
  c.dt = get_or(j, "", "dt", c.dt);
  c.horizon = get_or(j, "", "horizon", c.horizon);
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned() &&
        !(s.is_number_integer() && s.get<int64_t>() >= 0)) {
      throw ConfigError("config: field 'seed' must be a non-negative integer");
    }
    c.seed = s.get<uint64_t>();
  }
  c.nominal_range = get_or(j, "", "nominal_range", c.nominal_range);
  c.burn_in_fraction =
      get_or(j, "", "burn_in_fraction", c.burn_in_fraction);

  if (j.contains("region")) {
    const auto& r = j.at("region");
    check_keys(r, "region", {"min", "max"});
    c.region.lo = get_vec3(r, "region.", "min", c.region.lo);
    c.region.hi = get_vec3(r, "region.", "max", c.region.hi);
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, "noise", {"bearing_sigma", "position_sigma"});
    c.bearing_sigma = get_or(n, "noise.", "bearing_sigma", c.bearing_sigma);
    c.position_sigma = get_or(n, "noise.", "position_sigma", c.position_sigma);
  }

  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    check_keys(g, "graph", {"k", "static_per_trial", "drop_prob"});
    c.graph.k = get_or(g, "graph.", "k", c.graph.k);
    c.graph.static_per_trial =
        get_or(g, "graph.", "static_per_trial", c.graph.static_per_trial);
    c.graph.drop_prob = get_or(g, "graph.", "drop_prob", c.graph.drop_prob);
  }

  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    const std::string type = get_or<std::string>(t, "trajectory.", "type", "");
    if (type == "circle") {
      check_keys(t, "trajectory", {"type", "p0", "speed", "time_scale"});
      CircleSpec s;
      s.p0 = get_vec3(t, "trajectory.", "p0", s.p0);
      s.speed = get_or(t, "trajectory.", "speed", s.speed);
      s.time_scale = get_or(t, "trajectory.", "time_scale", s.time_scale);
      if (s.time_scale <= 0.0) {
        throw ConfigError("config: trajectory.time_scale must be > 0");
      }
      c.trajectory = s;
    } else if (type == "square") {
      check_keys(t, "trajectory", {"type", "p0", "v0", "turn_period"});
      SquareSpec s;
      s.p0 = get_vec3(t, "trajectory.", "p0", s.p0);
      s.v0 = get_vec3(t, "trajectory.", "v0", s.v0);
      s.turn_period = get_or(t, "trajectory.", "turn_period", s.turn_period);
      if (s.turn_period <= 0.0) {
        throw ConfigError("config: trajectory.turn_period must be > 0");
      }
      c.trajectory = s;
    } else if (type == "waypoints") {
      check_keys(t, "trajectory", {"type", "points"});
      WaypointSpec s;
      if (!t.contains("points") || !t.at("points").is_array()) {
        throw ConfigError("config: trajectory.points must be an array");
      }
      for (const auto& pt : t.at("points")) {
        check_keys(pt, "trajectory.points[]", {"t", "p"});
        s.points.emplace_back(get_or(pt, "trajectory.points[].", "t", 0.0),
                              get_vec3(pt, "trajectory.points[].", "p",
                                       Vec3::Zero()));
      }
      if (s.points.size() < 2) {
        throw ConfigError("config: trajectory.points needs >= 2 entries");
      }
      for (size_t i = 1; i < s.points.size(); ++i) {
        if (s.points[i].first <= s.points[i - 1].first) {
          throw ConfigError(
              "config: trajectory.points times must be strictly increasing");
        }
      }
      c.trajectory = s;
    } else {
      throw ConfigError(
          "config: trajectory.type must be circle, square, or waypoints");
    }
  }

  if (j.contains("baseline")) {
    const auto& b = j.at("baseline");
    check_keys(b, "baseline", {"q", "init_pos_sigma", "init_vel_sigma"});
    c.baseline.q = get_or(b, "baseline.", "q", c.baseline.q);
    c.baseline.init_pos_sigma =
        get_or(b, "baseline.", "init_pos_sigma", c.baseline.init_pos_sigma);
    c.baseline.init_vel_sigma =
        get_or(b, "baseline.", "init_vel_sigma", c.baseline.init_vel_sigma);
  }

  bool sigma_nu_given = false;
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e, "estimator", {"c", "gamma1", "gamma2", "sigma_nu"});
    c.estimator.c = get_or(e, "estimator.", "c", c.estimator.c);
    c.estimator.gamma1 = get_or(e, "estimator.", "gamma1", c.estimator.gamma1);
    c.estimator.gamma2 = get_or(e, "estimator.", "gamma2", c.estimator.gamma2);
    if (e.contains("sigma_nu") && !e.at("sigma_nu").is_null()) {
      c.estimator.sigma_nu = get_or(e, "estimator.", "sigma_nu", 0.0);
      sigma_nu_given = true;
    }
  }
  if (!sigma_nu_given) {
    const double derived =
        std::sqrt(c.position_sigma * c.position_sigma +
                  c.nominal_range * c.nominal_range * c.bearing_sigma *
                      c.bearing_sigma);
    if (derived <= 0.0) {
      throw ConfigError(
          "config: estimator.sigma_nu required when both noise sigmas are 0");
    }
    c.estimator.sigma_nu = derived;
  }

  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["dt"] = c.dt;
  j["horizon"] = c.horizon;
  if (c.seed) j["seed"] = *c.seed;
  j["region"] = {{"min", {c.region.lo.x(), c.region.lo.y(), c.region.lo.z()}},
                 {"max", {c.region.hi.x(), c.region.hi.y(), c.region.hi.z()}}};
  j["noise"] = {{"bearing_sigma", c.bearing_sigma},
                {"position_sigma", c.position_sigma}};
  j["graph"] = {{"k", c.graph.k},
                {"static_per_trial", c.graph.static_per_trial},
                {"drop_prob", c.graph.drop_prob}};
  if (const auto* s = std::get_if<CircleSpec>(&c.trajectory)) {
    j["trajectory"] = {{"type", "circle"},
                       {"p0", {s->p0.x(), s->p0.y(), s->p0.z()}},
                       {"speed", s->speed},
                       {"time_scale", s->time_scale}};
  } else if (const auto* s = std::get_if<SquareSpec>(&c.trajectory)) {
    j["trajectory"] = {{"type", "square"},
                       {"p0", {s->p0.x(), s->p0.y(), s->p0.z()}},
                       {"v0", {s->v0.x(), s->v0.y(), s->v0.z()}},
                       {"turn_period", s->turn_period}};
  } else if (const auto* s = std::get_if<WaypointSpec>(&c.trajectory)) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [t, p] : s->points) {
      pts.push_back({{"t", t}, {"p", {p.x(), p.y(), p.z()}}});
    }
    j["trajectory"] = {{"type", "waypoints"}, {"points", pts}};
  }
  j["estimator"] = {{"c", c.estimator.c},
                    {"gamma1", c.estimator.gamma1},
                    {"gamma2", c.estimator.gamma2},
                    {"sigma_nu", c.estimator.sigma_nu}};
  j["nominal_range"] = c.nominal_range;
  j["baseline"] = {{"q", c.baseline.q},
                   {"init_pos_sigma", c.baseline.init_pos_sigma},
                   {"init_vel_sigma", c.baseline.init_vel_sigma}};
  j["burn_in_fraction"] = c.burn_in_fraction;
  return j;
}

}  // namespace stt
