#pragma once

// Command-line front end. Every subcommand accepts --seed, --threads, --out
// and --config; all other flags are subcommand-specific. A config file is a
// flat JSON object whose keys are long flag names without the leading dashes.
// Its entries are applied before the command line, so explicit flags win.

#include "interp_lab/interp_lab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace ilab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// A configuration problem; reported with exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline std::vector<std::string> split_list(const std::string& text, const std::string& key) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError("--" + key + ": empty list entry");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("--" + key + ": empty list");
  return out;
}

inline std::vector<int> split_ints(const std::string& text, const std::string& key) {
  std::vector<int> out;
  for (const auto& s : split_list(text, key)) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size() || v < 1) throw std::invalid_argument(s);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("--" + key + ": expected positive integers, got '" + s + "'");
    }
  }
  return out;
}

/// Options of one subcommand plus a record of their resolved values.
class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& description)
      : sub_(app.add_subcommand(name, description)) {
    sub_->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    add("--seed", seed, "Base RNG seed");
    add("--threads", threads, "Worker threads (0: INTERPOLANT_LAB_THREADS or all cores)")->check(CLI::NonNegativeNumber);
    add("--out", out, "Output directory");
    sub_->add_option("--config", config, "Flat JSON file of option values (flags override it)")
        ->check(CLI::ExistingFile);
  }

  template <class T>
  CLI::Option* add(const std::string& flag, T& var, const std::string& description) {
    auto* opt = sub_->add_option(flag, var, description)->capture_default_str();
    const std::string key = flag.substr(2);
    record_.emplace_back(key, [&var]() { return json(var); });
    return opt;
  }

  CLI::App* app() const { return sub_; }
  bool parsed() const { return sub_->parsed(); }

  json resolved(const std::string& command) const {
    json j;
    j["command"] = command;
    for (const auto& [key, get] : record_) j[key] = get();
    return j;
  }

  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = "results";
  std::string config;

 private:
  CLI::App* sub_;
  std::vector<std::pair<std::string, std::function<json()>>> record_;
};

inline void apply_threads(int requested) {
  int n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("INTERPOLANT_LAB_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (const std::logic_error&) {
        throw ConfigError("INTERPOLANT_LAB_THREADS: not an integer: '" + std::string(env) + "'");
      }
      if (n < 0) throw ConfigError("INTERPOLANT_LAB_THREADS: must be >= 0");
    }
  }
  set_thread_count(n);
}

inline std::string json_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) return io::fmt(v.get<double>());
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + json_scalar(v[i], key);
    return s;
  }
  throw ConfigError("config key '" + key + "': unsupported value type");
}

/// Expands --config into flags inserted right after the subcommand name.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::size_t sub_pos = args.size();
  CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub = app.get_subcommand_no_throw(args[i]);
      if (sub) sub_pos = i;
      break;
    }
  }
  if (!sub) return args;
  std::string path;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: '" + path + "' must hold a flat JSON object");
  std::vector<std::string> inserted;
  for (const auto& [key, value] : j.items()) {
    if (key == "config" || key == "command") continue;
    if (sub->get_option_no_throw("--" + key) == nullptr) throw ConfigError("config: unknown key '" + key + "'");
    if (value.is_object()) throw ConfigError("config key '" + key + "': nested objects are not allowed");
    inserted.push_back("--" + key);
    inserted.push_back(json_scalar(value, key));
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  out.insert(out.end(), inserted.begin(), inserted.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  return out;
}

inline void write_config(const Command& cmd, const std::string& name) {
  io::write_json(fs::path(cmd.out) / "config.json", cmd.resolved(name));
}

// ---------------------------------------------------------------------------
// Subcommands

struct ScheduleOpts {
  std::string kind = "designed-gaussian";
  double lambda_star = 0.01;
  double scale_m = 2.0;
  double kappa = 1.0;
  double power = 2.0;
  double p = 0.5;
  int grid = 101;
  int k = 1;
  int opt_grid = 512;
  int mc = 4096;
  std::string input;
};

inline int run_schedule(const Command& cmd, const ScheduleOpts& o) {
  std::optional<Schedule> schedule;
  std::optional<TabulatedSchedule> table;
  if (o.kind == "linear") {
    schedule = Schedule::linear();
  } else if (o.kind == "linear-trig") {
    schedule = Schedule::linear_trig();
  } else if (o.kind == "trig-power") {
    schedule = Schedule::trig_from_beta(BetaCurve::power(o.power));
  } else if (o.kind == "designed-gaussian") {
    schedule = Schedule::designed_gaussian(o.lambda_star);
  } else if (o.kind == "approx-minlip-gmm") {
    schedule = Schedule::approx_min_lip_gmm(o.scale_m);
  } else if (o.kind == "dilated") {
    schedule = Schedule::dilated(o.kappa, o.scale_m);
  } else if (o.kind == "optimal-gaussian") {
    const auto target = GaussianTarget::diagonal({o.lambda_star});
    const auto ref = gaussian_drift(Schedule::linear(), target);
    const auto g = g_function_for_optimizer(Target{target}, &ref, o.k, o.mc, cmd.seed);
    table = solve_optimal_schedule(g.g, {o.k, o.opt_grid, g.mode});
  } else if (o.kind == "optimal-bimodal") {
    const auto target = BimodalGmmTarget::one_d(o.scale_m, o.p);
    const auto g = g_function_for_optimizer(Target{target}, nullptr, o.k, o.mc, cmd.seed);
    table = solve_optimal_schedule(g.g, {o.k, o.opt_grid, g.mode});
  } else if (o.kind == "tabulated") {
    if (o.input.empty()) throw ConfigError("--input: required for --kind tabulated");
    table = io::read_schedule_csv(o.input);
  } else {
    throw ConfigError("--kind: unknown schedule kind '" + o.kind + "'");
  }
  if (table) {
    io::write_schedule_csv(fs::path(cmd.out) / "tabulated.csv", *table);
    schedule = Schedule::tabulated(*table);
  }
  const auto eps = optimal_epsilon(*schedule);
  io::CsvWriter w(fs::path(cmd.out) / "schedule.csv", {"t", "alpha", "beta", "alpha_dot", "beta_dot", "epsilon"});
  for (const double t : num::linspace(0.0, 1.0, static_cast<std::size_t>(o.grid))) {
    const auto v = schedule->eval(t);
    w.row({t, v.alpha, v.beta, v.alpha_dot, v.beta_dot, eps(t)});
  }
  std::cout << "schedule " << schedule->name() << ": wrote " << o.grid << " rows to "
            << (fs::path(cmd.out) / "schedule.csv").string() << '\n';
  return 0;
}

struct DriftCheckOpts {
  double m = 4.0;
  double scale_m = 2.0;
  double p = 0.3;
  int probes = 200;
  double t_min = 1e-3;
};

inline int run_drift_check(const Command& cmd, const DriftCheckOpts& o) {
  if (!(o.t_min > 0.0 && o.t_min < 0.5)) throw ConfigError("--t-min: must lie in (0, 0.5)");
  struct Row {
    std::string check;
    double error;
    double tolerance;
  };
  std::vector<Row> rows;
  Rng rng(cmd.seed, Stream::Probe, 0);
  auto draw_t = [&] { return o.t_min + (1.0 - 2.0 * o.t_min) * rng.uniform(); };

  const auto gauss = GaussianTarget::diagonal({o.m});
  const auto lin_ref = gaussian_drift(Schedule::linear(), gauss);
  {
    const auto moved = transfer_drift(lin_ref, Schedule::designed_gaussian(o.m));
    double err = 0.0;
    for (int i = 0; i < o.probes; ++i) {
      const double t = draw_t();
      const double x = 3.0 * std::sqrt(o.m) * (2.0 * rng.uniform() - 1.0);
      err = std::max(err, std::abs(moved.eval(t, Eigen::VectorXd::Constant(1, x))[0] - 0.5 * std::log(o.m) * x));
    }
    rows.push_back({"gaussian_transfer_to_designed", err, 1e-9});
  }
  {
    const auto moved = transfer_drift(lin_ref, Schedule::linear());
    double err = 0.0;
    for (int i = 0; i < o.probes; ++i) {
      const double t = draw_t();
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 3.0 * std::sqrt(o.m) * (2.0 * rng.uniform() - 1.0));
      err = std::max(err, std::abs(moved.eval(t, x)[0] - lin_ref.eval(t, x)[0]));
    }
    rows.push_back({"transfer_to_linear_identity", err, 1e-12});
  }
  const auto bimodal = BimodalGmmTarget::one_d(o.scale_m, o.p);
  const auto gmm = GeneralGmmTarget::from_bimodal(bimodal);
  const auto square = Schedule::trig_from_beta(BetaCurve::power(2.0));
  {
    const auto moved = transfer_drift(general_gmm_drift(Schedule::linear(), gmm), square);
    const auto closed = bimodal_drift(square, bimodal);
    const double sigma = std::sqrt(1.0 + o.scale_m * o.scale_m);
    double err = 0.0;
    for (int i = 0; i < o.probes; ++i) {
      const double t = draw_t();
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 3.0 * sigma * (2.0 * rng.uniform() - 1.0));
      err = std::max(err, std::abs(moved.eval(t, x)[0] - closed.eval(t, x)[0]));
    }
    rows.push_back({"bimodal_transfer_to_trig_square", err, 1e-8});
  }
  {
    std::vector<std::pair<std::string, DriftOracle>> oracles = {
        {"gaussian", gaussian_drift(Schedule::linear(), gauss)},
        {"general_gmm", general_gmm_drift(Schedule::linear_trig(), gmm)},
        {"bimodal", bimodal_drift(Schedule::linear_trig(), bimodal)},
        {"transfer", transfer_drift(general_gmm_drift(Schedule::linear(), gmm), square)},
    };
    for (const auto& [name, oracle] : oracles) {
      double err = 0.0;
      for (int i = 0; i < 50; ++i) {
        const double t = draw_t();
        const std::vector<double> x{3.0 * (2.0 * rng.uniform() - 1.0)};
        const Eigen::MatrixXd a = oracle.jacobian(t, x);
        const Eigen::MatrixXd f = oracle.fd_jacobian(t, x);
        err = std::max(err, (a - f).norm() / std::max(1.0, a.norm()));
      }
      rows.push_back({"jacobian_fd_" + name, err, 1e-4});
    }
  }
  {
    const auto s = score_from_drift(lin_ref, Schedule::linear());
    const auto back = drift_from_score(s, Schedule::linear());
    double err = 0.0;
    for (int i = 0; i < o.probes; ++i) {
      const double t = draw_t();
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 3.0 * (2.0 * rng.uniform() - 1.0));
      err = std::max(err, std::abs(back.eval(t, x)[0] - lin_ref.eval(t, x)[0]));
    }
    rows.push_back({"score_round_trip", err, 1e-10});
  }
  io::CsvWriter w(fs::path(cmd.out) / "drift_check.csv", {"check", "max_error", "tolerance", "pass"});
  bool ok = true;
  for (const auto& r : rows) {
    const bool pass = r.error <= r.tolerance;
    ok = ok && pass;
    w.row_strings({r.check, io::fmt(r.error), io::fmt(r.tolerance), pass ? "1" : "0"});
    std::cout << (pass ? "PASS " : "FAIL ") << r.check << " max_error=" << r.error << " tol=" << r.tolerance << '\n';
  }
  return ok ? 0 : 1;
}

struct LipOpts {
  std::string target = "gaussian";
  double m = 100.0;
  double scale_m = 2.0;
  double p = 0.5;
  std::string schedule = "linear";
  int t_grid = 128;
  int mc = 256;
};

inline int run_lip(const Command& cmd, const LipOpts& o) {
  const auto schedule = schedule_from_string(o.schedule);
  std::optional<DriftOracle> drift;
  std::optional<Target> target;
  if (o.target == "gaussian") {
    const auto g = GaussianTarget::diagonal({o.m});
    drift = gaussian_drift(schedule, g);
    target = g;
  } else if (o.target == "bimodal") {
    const auto b = BimodalGmmTarget::one_d(o.scale_m, o.p);
    const auto v = schedule.eval(0.5);
    if (std::abs(v.alpha * v.alpha + v.beta * v.beta - 1.0) > 1e-12)
      throw ConfigError("--schedule: the bimodal target needs alpha^2 + beta^2 = 1, got '" + o.schedule + "'");
    drift = bimodal_drift(schedule, b);
    target = b;
  } else {
    throw ConfigError("--target: expected 'gaussian' or 'bimodal', got '" + o.target + "'");
  }
  const auto lip = avg_lip2(*drift, schedule, *target, o.t_grid, o.mc, cmd.seed);
  const auto ke = kinetic_energy(*drift, schedule, *target, o.t_grid, o.mc, cmd.seed);
  io::write_lip_report(fs::path(cmd.out) / "lip.csv", lip);
  io::CsvWriter w(fs::path(cmd.out) / "kinetic_energy.csv", {"key", "value"});
  w.row_strings({"kinetic_energy", io::fmt(ke.value)});
  w.row_strings({"std_error", io::fmt(ke.std_error)});
  std::cout << "A2=" << io::fmt(lip.a2) << " +- " << lip.std_error << "  sup_lip=" << lip.sup_lipschitz
            << "  kinetic_energy=" << io::fmt(ke.value) << '\n';
  return 0;
}

struct KlOpts {
  double m = 1.0;
  double delta = 0.2;
  std::string schedules = "linear,linear-trig,designed-gaussian:0.01,approx-minlip-gmm:2";
  int quad = 257;
  int mc = 2000;
  double eta_min = 1e-3;
  double eta_max = 1e3;
};

inline int run_kl(const Command& cmd, const KlOpts& o) {
  KlBenchConfig cfg;
  cfg.m = o.m;
  cfg.delta = o.delta;
  cfg.schedules = split_list(o.schedules, "schedules");
  cfg.quad.quad_points = o.quad;
  cfg.quad.mc_per_t = o.mc;
  cfg.quad.eta_min = o.eta_min;
  cfg.quad.eta_max = o.eta_max;
  cfg.seed = cmd.seed;
  const auto r = kl_invariance_bench(cfg);
  io::CsvWriter w(fs::path(cmd.out) / "results.csv",
                  {"schedule", "estimate", "std_error", "quad_error", "budget", "analytic"});
  for (const auto& row : r.rows) {
    w.row_strings({row.schedule, io::fmt(row.report.estimate), io::fmt(row.report.std_error),
                   io::fmt(row.report.quad_error), io::fmt(row.budget), io::fmt(r.analytic)});
    std::cout << row.schedule << ": KL*=" << io::fmt(row.report.estimate) << " budget=" << row.budget << '\n';
  }
  std::cout << "analytic=" << r.analytic << " max_relative_spread=" << r.max_relative_spread << '\n';
  return 0;
}

struct GmmOpts {
  int d = 1000;
  double p = 0.3;
  int n = 10000;
  std::string steps = "2,3,4";
  std::string schedules = "linear-trig,approx-minlip-gmm";
  int seeds = 5;
  double t_min = 1e-3;
  double t_max = 1.0 - 1e-3;
};

inline int run_gmm(const Command& cmd, const GmmOpts& o) {
  GmmBenchConfig cfg;
  cfg.d = o.d;
  cfg.p = o.p;
  cfg.n = o.n;
  cfg.steps = split_ints(o.steps, "steps");
  cfg.schedules = split_list(o.schedules, "schedules");
  cfg.seeds = o.seeds;
  cfg.seed = cmd.seed;
  cfg.t_min = o.t_min;
  cfg.t_max = o.t_max;
  const auto r = gmm_mode_weight_bench(cfg);
  {
    io::CsvWriter w(fs::path(cmd.out) / "results.csv",
                    {"schedule", "rk4_steps", "minor_weight_mean", "minor_weight_std", "runs", "reference"});
    for (const auto& s : r.summary) {
      w.row_strings({s.schedule, std::to_string(s.rk4_steps), io::fmt(s.mean), io::fmt(s.std_dev),
                     std::to_string(s.runs), io::fmt(reference_minor_weight(s.schedule, s.rk4_steps))});
      std::cout << s.schedule << " steps=" << s.rk4_steps << " minor_weight=" << s.mean << " +- " << s.std_dev
                << '\n';
    }
  }
  io::CsvWriter w(fs::path(cmd.out) / "runs.csv",
                  {"schedule", "rk4_steps", "seed", "minor_weight", "em_iterations", "separation"});
  for (const auto& x : r.runs)
    w.row_strings({x.schedule, std::to_string(x.rk4_steps), std::to_string(x.seed), io::fmt(x.minor_weight),
                   std::to_string(x.em_iterations), io::fmt(x.separation)});
  return 0;
}

struct GrfOpts {
  std::string resolutions = "32,64,128";
  std::string steps = "20,40,80";
  std::string schedules = "linear,designed-gaussian";
  int samples = 512;
  int k_max = 16;
  double s = 3.0;
  double tau = 1.0;
  double sigma2 = std::pow(4.0 * std::numbers::pi * std::numbers::pi + 1.0, 3.0);
};

inline int run_grf(const Command& cmd, const GrfOpts& o) {
  GrfBenchConfig cfg;
  cfg.resolutions = split_ints(o.resolutions, "resolutions");
  cfg.steps = split_ints(o.steps, "steps");
  cfg.schedules = split_list(o.schedules, "schedules");
  cfg.n_samples = o.samples;
  cfg.k_max = o.k_max;
  cfg.field.s = o.s;
  cfg.field.tau = o.tau;
  cfg.field.sigma2 = o.sigma2;
  cfg.seed = cmd.seed;
  for (int n : cfg.resolutions)
    if (n < 4) throw ConfigError("--resolutions: every grid must be >= 4");
  const auto r = grf_spectrum_bench(cfg);
  const fs::path dir = fs::path(cmd.out) / "spectra";
  std::map<int, double> lambda;
  for (const auto& res : r.resolutions) {
    lambda[res.grid] = res.lambda_star;
    const auto tag = "N" + std::to_string(res.grid);
    io::write_spectrum_csv(dir / ("truth_" + tag + ".csv"), res.truth);
    io::CsvWriter w(dir / ("analytic_" + tag + ".csv"), {"k", "energy"});
    for (std::size_t k = 0; k < res.analytic.size(); ++k) w.row_strings({std::to_string(k), io::fmt(res.analytic[k])});
    std::cout << tag << " truth_error=" << res.truth_error << '\n';
  }
  io::CsvWriter w(fs::path(cmd.out) / "results.csv",
                  {"grid", "schedule", "rk4_steps", "lambda_star", "mean_rel_error", "mean_rel_error_vs_truth"});
  for (const auto& run : r.runs) {
    io::write_spectrum_csv(
        dir / ("N" + std::to_string(run.grid) + "_" + run.schedule + "_" + std::to_string(run.steps) + ".csv"),
        run.spectrum);
    w.row_strings({std::to_string(run.grid), run.schedule, std::to_string(run.steps), io::fmt(lambda[run.grid]),
                   io::fmt(run.error), io::fmt(run.error_vs_truth)});
    std::cout << "N" << run.grid << ' ' << run.schedule << " steps=" << run.steps << " error=" << run.error << '\n';
  }
  return 0;
}

struct SdeOpts {
  double m = 4.0;
  std::string schedule = "linear";
  int steps = 400;
  int n = 100000;
  double t_min = 1e-3;
  double t_max = 1.0 - 1e-3;
  double t_mid = 0.5;
};

inline int run_sde(const Command& cmd, const SdeOpts& o) {
  const auto schedule = schedule_from_string(o.schedule);
  const auto g = GaussianTarget::diagonal({o.m});
  const Target target{g};
  const auto drift = gaussian_drift(schedule, g);
  const auto score = gaussian_score(schedule, g);
  const auto eps = optimal_epsilon(schedule);
  const auto init = initial_noise(schedule, target, o.t_min, o.n, cmd.seed);
  io::CsvWriter w(fs::path(cmd.out) / "results.csv", {"t", "variance", "expected", "std_error", "steps"});
  for (const double t_end : {o.t_mid, o.t_max}) {
    if (!(t_end > o.t_min)) throw ConfigError("--t-mid: must exceed --t-min");
    IntegratorConfig ic;
    ic.method = Method::EulerMaruyama;
    ic.t_min = o.t_min;
    ic.t_max = t_end;
    ic.steps = std::max(1, static_cast<int>(std::lround(o.steps * (t_end - o.t_min) / (o.t_max - o.t_min))));
    const auto out = integrate_sde(drift, score, eps, init, ic, cmd.seed);
    std::vector<double> sq(static_cast<std::size_t>(out.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) sq[static_cast<std::size_t>(i)] = out.states(i, 0) * out.states(i, 0);
    const auto st = num::mean_stat(sq);
    const auto v = schedule.eval(t_end);
    const double expected = v.alpha * v.alpha + v.beta * v.beta * o.m;
    w.row({t_end, st.mean, expected, st.std_error, static_cast<double>(ic.steps)});
    std::cout << "t=" << t_end << " variance=" << st.mean << " expected=" << expected << " +- " << st.std_error
              << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct Program {
  CLI::App app{"Stochastic-interpolant schedule workbench", "interp-lab"};
  Command schedule{app, "schedule", "Tabulate (t, alpha, beta, alpha_dot, beta_dot, epsilon); optionally optimize"};
  Command drift_check{app, "drift-check", "Audit the transfer formula, Jacobians and drift/score conversions"};
  Command lip{app, "lip", "Averaged squared Lipschitz constant and kinetic energy"};
  Command kl{app, "kl", "KL* under optimal diffusion across schedules"};
  Command gmm{app, "gmm-bench", "Few-step minor-mode weights for the high-dimensional bimodal mixture"};
  Command grf{app, "grf-bench", "Spectra of generated Gaussian random fields"};
  Command sde{app, "sde-check", "Marginal variance of the optimal-diffusion SDE"};
  ScheduleOpts so;
  DriftCheckOpts dco;
  LipOpts lo;
  KlOpts ko;
  GmmOpts go;
  GrfOpts fo;
  SdeOpts sdo;

  Program() {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    schedule.add("--kind", so.kind,
                 "linear | linear-trig | trig-power | designed-gaussian | approx-minlip-gmm | dilated | "
                 "optimal-gaussian | optimal-bimodal | tabulated");
    schedule.add("--lambda-star", so.lambda_star, "Target variance lambda* (designed-gaussian, optimal-gaussian)")
        ->check(CLI::PositiveNumber);
    schedule.add("--scale-m", so.scale_m, "Scale M (approx-minlip-gmm, dilated, optimal-bimodal)")
        ->check(CLI::PositiveNumber);
    schedule.add("--kappa", so.kappa, "Dilation kappa")->check(CLI::PositiveNumber);
    schedule.add("--power", so.power, "Exponent a of beta = t^a (trig-power)")->check(CLI::PositiveNumber);
    schedule.add("--p", so.p, "Mode weight p (optimal-bimodal)")->check(CLI::Range(0.0, 1.0));
    schedule.add("--grid", so.grid, "Rows in schedule.csv")->check(CLI::Range(2, 100000000));
    schedule.add("--k", so.k, "Power 2k of the Lipschitz objective (optimizer)")->check(CLI::PositiveNumber);
    schedule.add("--opt-grid", so.opt_grid, "Optimizer beta grid size")->check(CLI::Range(3, 100000000));
    schedule.add("--mc", so.mc, "Monte Carlo samples for G (optimal kinds)")->check(CLI::PositiveNumber);
    schedule.add("--input", so.input, "Schedule CSV with header t,beta (tabulated)");

    drift_check.add("--m", dco.m, "Gaussian target variance")->check(CLI::PositiveNumber);
    drift_check.add("--scale-m", dco.scale_m, "Bimodal separation M")->check(CLI::PositiveNumber);
    drift_check.add("--p", dco.p, "Bimodal weight p")->check(CLI::Range(0.0, 1.0));
    drift_check.add("--probes", dco.probes, "Random (t, x) probes per check")->check(CLI::PositiveNumber);
    drift_check.add("--t-min", dco.t_min, "Probes use t in [t-min, 1 - t-min]");

    lip.add("--target", lo.target, "gaussian | bimodal (1D)");
    lip.add("--m", lo.m, "Gaussian target variance")->check(CLI::PositiveNumber);
    lip.add("--scale-m", lo.scale_m, "Bimodal separation M")->check(CLI::PositiveNumber);
    lip.add("--p", lo.p, "Bimodal weight p")->check(CLI::Range(0.0, 1.0));
    lip.add("--schedule", lo.schedule,
            "linear | linear-trig | trig-power:<a> | designed-gaussian:<l> | approx-minlip-gmm:<M> | dilated:<k>:<M>");
    lip.add("--t-grid", lo.t_grid, "Midpoint nodes in t")->check(CLI::PositiveNumber);
    lip.add("--mc", lo.mc, "Samples per node")->check(CLI::PositiveNumber);

    kl.add("--m", ko.m, "Gaussian target variance")->check(CLI::PositiveNumber);
    kl.add("--delta", ko.delta, "Score error amplitude");
    kl.add("--schedules", ko.schedules, "Comma-separated schedule list");
    kl.add("--quad", ko.quad, "Simpson nodes in log(eta); must be 1 mod 4");
    kl.add("--mc", ko.mc, "Samples per node")->check(CLI::Range(2, 100000000));
    kl.add("--eta-min", ko.eta_min, "Lower eta truncation")->check(CLI::PositiveNumber);
    kl.add("--eta-max", ko.eta_max, "Upper eta truncation")->check(CLI::PositiveNumber);

    gmm.add("--d", go.d, "Dimension")->check(CLI::PositiveNumber);
    gmm.add("--p", go.p, "Weight of the +r mode")->check(CLI::Range(0.0, 1.0));
    gmm.add("--n", go.n, "Samples per run")->check(CLI::Range(10, 100000000));
    gmm.add("--steps", go.steps, "Comma-separated RK4 step counts");
    gmm.add("--schedules", go.schedules, "Comma-separated: linear-trig, approx-minlip-gmm");
    gmm.add("--seeds", go.seeds, "Seeds per configuration (seed, seed+1, ...)")->check(CLI::PositiveNumber);
    gmm.add("--t-min", go.t_min, "Integration start");
    gmm.add("--t-max", go.t_max, "Integration end");

    grf.add("--resolutions", fo.resolutions, "Comma-separated grid sizes N");
    grf.add("--steps", fo.steps, "Comma-separated RK4 step counts");
    grf.add("--schedules", fo.schedules, "Comma-separated: linear, designed-gaussian");
    grf.add("--samples", fo.samples, "Fields per configuration")->check(CLI::PositiveNumber);
    grf.add("--k-max", fo.k_max, "Largest shell in the error metric")->check(CLI::PositiveNumber);
    grf.add("--s", fo.s, "Smoothness s")->check(CLI::NonNegativeNumber);
    grf.add("--tau", fo.tau, "Mass tau")->check(CLI::PositiveNumber);
    grf.add("--sigma2", fo.sigma2, "Amplitude sigma^2")->check(CLI::PositiveNumber);

    sde.add("--m", sdo.m, "Gaussian target variance")->check(CLI::PositiveNumber);
    sde.add("--schedule", sdo.schedule, "Schedule description (see lip --schedule)");
    sde.add("--steps", sdo.steps, "Euler-Maruyama steps over [t-min, t-max]")->check(CLI::PositiveNumber);
    sde.add("--n", sdo.n, "Samples")->check(CLI::Range(2, 1000000000));
    sde.add("--t-min", sdo.t_min, "Integration start");
    sde.add("--t-max", sdo.t_max, "Integration end");
    sde.add("--t-mid", sdo.t_mid, "Intermediate time also checked");
  }

  int dispatch() {
    const std::pair<Command*, std::string> cmds[] = {{&schedule, "schedule"}, {&drift_check, "drift-check"},
                                                     {&lip, "lip"},           {&kl, "kl"},
                                                     {&gmm, "gmm-bench"},     {&grf, "grf-bench"},
                                                     {&sde, "sde-check"}};
    for (const auto& [cmd, name] : cmds) {
      if (!cmd->parsed()) continue;
      apply_threads(cmd->threads);
      fs::create_directories(cmd->out);
      write_config(*cmd, name);
      if (cmd == &schedule) return run_schedule(*cmd, so);
      if (cmd == &drift_check) return run_drift_check(*cmd, dco);
      if (cmd == &lip) return run_lip(*cmd, lo);
      if (cmd == &kl) return run_kl(*cmd, ko);
      if (cmd == &gmm) return run_gmm(*cmd, go);
      if (cmd == &grf) return run_grf(*cmd, fo);
      return run_sde(*cmd, sdo);
    }
    return 2;
  }
};

/// Exit codes: 0 success, 1 runtime failure, 2 configuration error.
inline int cli_main(int argc, char** argv) {
  Program prog;
  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(args, prog.app);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  }
  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    prog.app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return prog.app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return prog.app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  }
  try {
    return prog.dispatch();
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ilab::cli
