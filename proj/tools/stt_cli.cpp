// Command-line front end: single trials, Monte-Carlo benchmarks, noise
// sweeps, baseline comparisons, and the verification battery.
//
// Exit codes: 0 success, 1 a check or run failed, 2 usage or config error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stt/harness.hpp"
#include "stt/theory.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_path;
  std::string format = "csv";
  int trials = 100;
  int threads = 1;
  std::string filter = "stt";
};

void add_common(CLI::App* sub, CommonOpts* o, bool with_trials,
                bool with_filter) {
  sub->add_option("--config", o->config_path,
                  "Scenario config JSON file (defaults apply when omitted)");
  sub->add_option("--seed", o->seed,
                  "Master seed (falls back to the config seed, then to a "
                  "hash of the config)");
  sub->add_option("--out", o->out_path, "Output path (stdout when omitted)");
  sub->add_option("--format", o->format, "Output format: csv or json");
  if (with_trials) {
    sub->add_option("--trials", o->trials, "Monte-Carlo trial count");
    sub->add_option("--threads", o->threads, "Worker threads for trials");
  }
  if (with_filter) {
    sub->add_option("--filter", o->filter, "Estimator: stt, ckf, or plkf");
  }
}

stt::ScenarioConfig load_config(const std::string& path) {
  if (path.empty()) {
    return stt::config_from_json(nlohmann::json::object());
  }
  std::ifstream in(path);
  if (!in) throw stt::ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw stt::ConfigError("config file " + path +
                           " is not valid JSON: " + e.what());
  }
  return stt::config_from_json(j);
}

uint64_t resolve_seed(const CommonOpts& o, const stt::ScenarioConfig& cfg) {
  if (o.seed) return *o.seed;
  if (cfg.seed) return *cfg.seed;
  return stt::config_seed(cfg);
}

void check_format(const std::string& f) {
  if (f != "csv" && f != "json") {
    throw stt::ConfigError("format must be csv or json, got: " + f);
  }
}

void write_output(const std::string& path, const std::string& body) {
  if (path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw stt::ConfigError("cannot open output file: " + path);
  out << body;
  out.flush();
  if (!out) throw stt::ConfigError("write failed for output file: " + path);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int run_simulate(const CommonOpts& o) {
  check_format(o.format);
  const stt::ScenarioConfig cfg = load_config(o.config_path);
  const uint64_t seed = resolve_seed(o, cfg);
  const stt::TrialTrace tr =
      stt::run_trial(cfg, seed, stt::filter_from_name(o.filter));
  if (o.format == "csv") {
    std::ostringstream os;
    stt::write_trace_csv(os, tr);
    write_output(o.out_path, os.str());
  } else {
    nlohmann::json j = stt::trace_to_json(tr);
    j["seed"] = seed;
    write_output(o.out_path, j.dump(2) + "\n");
  }
  return 0;
}

int run_montecarlo(const CommonOpts& o) {
  check_format(o.format);
  const stt::ScenarioConfig cfg = load_config(o.config_path);
  const uint64_t seed = resolve_seed(o, cfg);
  const stt::RmseReport r = stt::monte_carlo(
      cfg, o.trials, seed, stt::filter_from_name(o.filter), o.threads);
  if (o.format == "csv") {
    std::ostringstream os;
    stt::write_report_csv(os, r);
    write_output(o.out_path, os.str());
  } else {
    nlohmann::json j = stt::report_to_json(r);
    j["seed"] = seed;
    j["filter"] = o.filter;
    write_output(o.out_path, j.dump(2) + "\n");
  }
  return 0;
}

int run_compare(const CommonOpts& o) {
  check_format(o.format);
  const stt::ScenarioConfig cfg = load_config(o.config_path);
  const uint64_t seed = resolve_seed(o, cfg);
  const stt::CompareReport r = stt::compare(cfg, o.trials, seed, o.threads);
  if (o.format == "csv") {
    std::ostringstream os;
    stt::write_compare_csv(os, r);
    write_output(o.out_path, os.str());
  } else {
    nlohmann::json j = stt::compare_to_json(r);
    j["seed"] = seed;
    write_output(o.out_path, j.dump(2) + "\n");
  }
  return 0;
}

std::vector<double> parse_sigmas(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw stt::ConfigError("bad sigma value in sweep list: " + item);
    }
  }
  return out;
}

int run_sweep(const CommonOpts& o, const std::string& sigma_csv) {
  check_format(o.format);
  const stt::ScenarioConfig cfg = load_config(o.config_path);
  const uint64_t seed = resolve_seed(o, cfg);
  const std::vector<double> sigmas = parse_sigmas(sigma_csv);
  const stt::SweepReport r =
      stt::sweep_noise(cfg, sigmas, o.trials, seed,
                       stt::filter_from_name(o.filter), o.threads);
  if (o.format == "csv") {
    std::ostringstream os;
    stt::write_sweep_csv(os, r);
    write_output(o.out_path, os.str());
  } else {
    nlohmann::json j = stt::sweep_to_json(r);
    j["seed"] = seed;
    write_output(o.out_path, j.dump(2) + "\n");
  }
  return 0;
}

int run_verify(const CommonOpts& o, const std::string& checks_csv) {
  check_format(o.format);
  std::vector<std::string> names;
  if (!checks_csv.empty()) {
    std::stringstream ss(checks_csv);
    std::string item;
    while (std::getline(ss, item, ',')) names.push_back(item);
  }
  const std::vector<stt::CheckResult> results =
      o.seed ? stt::run_verification(names, *o.seed)
             : stt::run_verification(names);
  bool all_pass = true;
  for (const auto& r : results) {
    if (r.applicable && !r.pass) all_pass = false;
  }
  if (o.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) j.push_back(stt::to_json(r));
    write_output(o.out_path, j.dump(2) + "\n");
  } else {
    std::string body = "check,lhs,rhs,applicable,pass\n";
    for (const auto& r : results) {
      body += r.name + "," + fmt17(r.lhs) + "," + fmt17(r.rhs) + "," +
              (r.applicable ? "true" : "false") + "," +
              (r.pass ? "true" : "false") + "\n";
    }
    write_output(o.out_path, body);
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Distributed bearing-only target motion estimation: simulator, "
      "benchmarks, and verification checks"};
  app.require_subcommand(1);

  CommonOpts sim_o, mc_o, cmp_o, sweep_o, ver_o;
  std::string sigma_csv = "0.01,0.05,0.1,0.2,0.3";
  std::string checks_csv;

  CLI::App* sim = app.add_subcommand("simulate", "Run one trial, export the trace");
  add_common(sim, &sim_o, false, true);

  CLI::App* mc = app.add_subcommand("montecarlo", "RMSE over repeated trials");
  add_common(mc, &mc_o, true, true);

  CLI::App* cmp = app.add_subcommand(
      "compare", "Benchmark stt against ckf and plkf on shared noise");
  add_common(cmp, &cmp_o, true, false);

  CLI::App* sweep = app.add_subcommand(
      "sweep-noise", "RMSE across bearing-noise levels, common random numbers");
  add_common(sweep, &sweep_o, true, true);
  sweep->add_option("--sigmas", sigma_csv,
                    "Comma-separated bearing sigmas, strictly increasing");

  ver_o.format = "json";
  CLI::App* ver = app.add_subcommand("verify", "Run the verification battery");
  add_common(ver, &ver_o, false, false);
  ver->add_option("--checks", checks_csv,
                  "Comma-separated check names (all when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_o);
    if (mc->parsed()) return run_montecarlo(mc_o);
    if (cmp->parsed()) return run_compare(cmp_o);
    if (sweep->parsed()) return run_sweep(sweep_o, sigma_csv);
    if (ver->parsed()) return run_verify(ver_o, checks_csv);
  } catch (const stt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
