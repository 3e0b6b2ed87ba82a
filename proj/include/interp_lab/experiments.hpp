#pragma once

// Desk-scale benches: few-step mode weights of a high-dimensional bimodal
// mixture, spectra of generated Gaussian random fields, and the schedule
// independence of KL after optimal diffusion tuning. Also the PCA projection
// and the 1D two-component EM fit the mode-weight bench relies on.

#include "interp_lab/core.hpp"
#include "interp_lab/diagnostics.hpp"
#include "interp_lab/drift.hpp"
#include "interp_lab/dynamics.hpp"
#include "interp_lab/numerics.hpp"
#include "interp_lab/rng.hpp"
#include "interp_lab/schedule.hpp"
#include "interp_lab/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace ilab {

// ---------------------------------------------------------------------------
// PCA and EM

/// Projection of centred samples onto the top principal direction, found by
/// power iteration on the sample covariance (matrix-free). The sign is chosen
/// so the 10 largest-norm samples project to a positive mean.
inline std::vector<double> pca_project_1d(const SampleBatch& batch, double tolerance = 1e-8, int max_iterations = 500) {
  const auto n = batch.size();
  const auto d = batch.dim();
  if (n < 2) throw ParameterError("pca_project_1d: need at least two samples");
  const Eigen::RowVectorXd mean = batch.states.colwise().mean();
  const RowMatrix centred = batch.states.rowwise() - mean;
  if (centred.cwiseAbs().maxCoeff() == 0.0) throw DegenerateError("pca_project_1d: zero covariance");
  Eigen::VectorXd v(d);
  Rng rng(0, Stream::Aux, 0);
  for (auto& x : v) x = 1.0 + 0.1 * rng.normal();
  v.normalize();
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd w = centred.transpose() * (centred * v);
    const double norm = w.norm();
    if (norm == 0.0) throw DegenerateError("pca_project_1d: zero covariance");
    w /= norm;
    if (w.dot(v) < 0.0) w = -w;
    const double change = (w - v).norm();
    v = w;
    if (change < tolerance) break;
  }
  Eigen::VectorXd proj = centred * v;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::VectorXd norms = batch.states.rowwise().norm();
  const auto top = std::min<std::size_t>(10, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return norms[a] > norms[b]; });
  double s = 0.0;
  for (std::size_t i = 0; i < top; ++i) s += proj[order[i]];
  if (s < 0.0) proj = -proj;
  return {proj.data(), proj.data() + proj.size()};
}

struct BimodalFit {
  double weight1 = 0.0, mean1 = 0.0, var1 = 0.0;
  double weight2 = 0.0, mean2 = 0.0, var2 = 0.0;
  int iterations = 0;
  double log_likelihood = 0.0;  // per sample
  // |mean1 - mean2| / (sd1 + sd2); below 1 the components are not resolved.
  double separation = 0.0;

  double minor_weight() const { return std::min(weight1, weight2); }
  bool resolved() const { return separation >= 1.0; }
};

/// Two-component 1D Gaussian mixture by EM. Means start from k-means++
/// seeding refined by Lloyd iterations; EM stops when the per-sample
/// log-likelihood improves by less than 1e-8 or after 500 iterations.
/// Components are returned in increasing order of mean.
inline BimodalFit fit_bimodal_1d(std::span<const double> values, std::uint64_t seed = 0, int max_iterations = 500,
                                 double tolerance = 1e-8, double variance_floor = 1e-6) {
  const std::size_t n = values.size();
  if (n < 10) throw ParameterError("fit_bimodal_1d: need at least 10 values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  if (*lo_it == *hi_it) throw DegenerateError("fit_bimodal_1d: all values are identical");

  Rng rng(seed, Stream::Aux, 0);
  double c[2];
  c[0] = values[std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)))];
  {
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (values[i] - c[0]) * (values[i] - c[0]);
    const double total = num::pairwise_sum(d2);
    double target = rng.uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    c[1] = values[pick];
  }
  std::vector<int> label(n, -1);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    double sum[2] = {0, 0};
    double cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int l = std::abs(values[i] - c[0]) <= std::abs(values[i] - c[1]) ? 0 : 1;
      if (l != label[i]) changed = true;
      label[i] = l;
      sum[l] += values[i];
      cnt[l] += 1;
    }
    for (int k = 0; k < 2; ++k)
      if (cnt[k] > 0) c[k] = sum[k] / cnt[k];
    if (!changed) break;
  }
  double w[2], m[2], v[2];
  for (int k = 0; k < 2; ++k) {
    double cnt = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (label[i] == k) {
        cnt += 1;
        sq += (values[i] - c[k]) * (values[i] - c[k]);
      }
    w[k] = std::max(cnt, 1.0) / static_cast<double>(n);
    m[k] = c[k];
    v[k] = std::max(cnt > 1 ? sq / cnt : 1.0, variance_floor);
  }
  const double ws = w[0] + w[1];
  w[0] /= ws;
  w[1] /= ws;

  std::vector<double> resp(n), ll(n);
  double prev = -std::numeric_limits<double>::infinity();
  BimodalFit out;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  int iter = 0;
  for (iter = 1; iter <= max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double lp[2];
      for (int k = 0; k < 2; ++k) {
        const double diff = values[i] - m[k];
        lp[k] = std::log(w[k]) - 0.5 * (log2pi + std::log(v[k]) + diff * diff / v[k]);
      }
      const double mx = std::max(lp[0], lp[1]);
      const double lse = mx + std::log(std::exp(lp[0] - mx) + std::exp(lp[1] - mx));
      resp[i] = std::exp(lp[0] - lse);
      ll[i] = lse;
    }
    const double cur = num::pairwise_sum(ll) / static_cast<double>(n);
    out.log_likelihood = cur;
    std::vector<double> r0(n), r0x(n), r1x(n);
    for (std::size_t i = 0; i < n; ++i) {
      r0[i] = resp[i];
      r0x[i] = resp[i] * values[i];
      r1x[i] = (1.0 - resp[i]) * values[i];
    }
    const double n0 = num::pairwise_sum(r0);
    const double n1 = static_cast<double>(n) - n0;
    if (n0 <= 0.0 || n1 <= 0.0) break;
    m[0] = num::pairwise_sum(r0x) / n0;
    m[1] = num::pairwise_sum(r1x) / n1;
    for (std::size_t i = 0; i < n; ++i) {
      r0x[i] = resp[i] * (values[i] - m[0]) * (values[i] - m[0]);
      r1x[i] = (1.0 - resp[i]) * (values[i] - m[1]) * (values[i] - m[1]);
    }
    v[0] = std::max(num::pairwise_sum(r0x) / n0, variance_floor);
    v[1] = std::max(num::pairwise_sum(r1x) / n1, variance_floor);
    w[0] = n0 / static_cast<double>(n);
    w[1] = n1 / static_cast<double>(n);
    if (cur - prev < tolerance) break;
    prev = cur;
  }
  out.iterations = std::min(iter, max_iterations);
  const int a = m[0] <= m[1] ? 0 : 1;
  const int b = 1 - a;
  out.weight1 = w[a];
  out.mean1 = m[a];
  out.var1 = v[a];
  out.weight2 = w[b];
  out.mean2 = m[b];
  out.var2 = v[b];
  out.separation = std::abs(out.mean2 - out.mean1) / (std::sqrt(out.var1) + std::sqrt(out.var2));
  return out;
}

// ---------------------------------------------------------------------------
// Mode-weight bench

struct GmmBenchConfig {
  int d = 1000;
  double p = 0.3;
  std::vector<std::string> schedules = {"linear-trig", "approx-minlip-gmm"};
  std::vector<int> steps = {2, 3, 4};
  int n = 10000;
  int seeds = 5;
  std::uint64_t seed = 0;
  double t_min = 1e-3;
  double t_max = 1.0 - 1e-3;
};

struct ModeWeightResult {
  std::string schedule;
  int rk4_steps = 0;
  double minor_weight = 0.0;
  int em_iterations = 0;
  std::uint64_t seed = 0;
  double separation = 0.0;
};

struct ModeWeightSummary {
  std::string schedule;
  int rk4_steps = 0;
  double mean = 0.0;
  double std_dev = 0.0;
  int runs = 0;
};

struct GmmBenchResult {
  std::vector<ModeWeightResult> runs;
  std::vector<ModeWeightSummary> summary;
};

/// Reference minor weights for d = 1000, p = 0.3 (NaN when not tabulated).
inline double reference_minor_weight(const std::string& schedule, int steps) {
  if (steps < 2 || steps > 4) return std::numeric_limits<double>::quiet_NaN();
  static const double linear[] = {0.00, 0.03, 0.09};
  static const double minlip[] = {0.42, 0.26, 0.27};
  if (schedule == "linear-trig") return linear[steps - 2];
  if (schedule == "approx-minlip-gmm") return minlip[steps - 2];
  return std::numeric_limits<double>::quiet_NaN();
}

/// "linear-trig" or "approx-minlip-gmm" (scale sqrt(d)) for the bench.
inline Schedule gmm_bench_schedule(const std::string& name, int d) {
  if (name == "linear-trig") return Schedule::linear_trig();
  if (name == "approx-minlip-gmm") return Schedule::approx_min_lip_gmm(std::sqrt(static_cast<double>(d)));
  throw ParameterError("gmm bench: unsupported schedule '" + name + "'");
}

/// Pushes alpha_{t_min} z through RK4 with the closed-form bimodal drift, then
/// projects by PCA and fits a two-component mixture. Seeds run from `seed`
/// to `seed + seeds - 1`; the noise draw of a seed is shared by all
/// schedules and step counts.
inline GmmBenchResult gmm_mode_weight_bench(const GmmBenchConfig& cfg) {
  if (cfg.seeds < 1 || cfg.n < 10) throw ParameterError("gmm bench: need seeds >= 1 and n >= 10");
  const auto target = BimodalGmmTarget::ones(cfg.d, cfg.p);
  GmmBenchResult out;
  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    const auto z = sample_noise(Target{target}, cfg.n, seed);
    for (const auto& name : cfg.schedules) {
      const auto schedule = gmm_bench_schedule(name, cfg.d);
      const auto drift = bimodal_drift(schedule, target);
      for (int steps : cfg.steps) {
        IntegratorConfig ic;
        ic.method = Method::RK4;
        ic.steps = steps;
        ic.t_min = cfg.t_min;
        ic.t_max = cfg.t_max;
        SampleBatch init = z;
        init.states *= schedule.eval(cfg.t_min).alpha;
        init.t = cfg.t_min;
        const auto final = integrate_ode(drift, init, ic);
        const auto proj = pca_project_1d(final);
        const auto fit = fit_bimodal_1d(proj, seed);
        out.runs.push_back({name, steps, fit.minor_weight(), fit.iterations, seed, fit.separation});
      }
    }
  }
  for (const auto& name : cfg.schedules) {
    for (int steps : cfg.steps) {
      std::vector<double> w;
      for (const auto& r : out.runs)
        if (r.schedule == name && r.rk4_steps == steps) w.push_back(r.minor_weight);
      const auto st = num::mean_stat(w);
      out.summary.push_back({name, steps, st.mean, std::sqrt(st.variance), static_cast<int>(w.size())});
    }
  }
  return out;
}

struct SignAudit {
  std::size_t samples = 0;
  std::size_t absorbed = 0;    // samples that reached the side favoured by h
  std::size_t violations = 0;  // absorbed samples that later left that side
};

/// Along the bimodal flow, d<r,x>/dt = beta_dot |r|^2 tanh(h + beta <r,x>),
/// so once <r,x> has the sign of h it keeps it. Checks this on stored frames.
inline SignAudit sign_monotonicity_audit(const Trajectory& tr, const Eigen::VectorXd& r, double h) {
  SignAudit out;
  if (tr.frames.empty()) return out;
  const double side = h >= 0.0 ? 1.0 : -1.0;
  const auto n = tr.frames.front().rows();
  out.samples = static_cast<std::size_t>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bool absorbed = false;
    bool violated = false;
    for (const auto& f : tr.frames) {
      const double proj = side * f.row(i).dot(r.transpose());
      if (absorbed && !(proj > 0.0)) violated = true;
      if (proj > 0.0) absorbed = true;
    }
    out.absorbed += absorbed ? 1 : 0;
    out.violations += violated ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian random field spectrum bench

struct GrfBenchConfig {
  std::vector<int> resolutions = {32, 64, 128};
  std::vector<int> steps = {20, 40, 80};
  std::vector<std::string> schedules = {"linear", "designed-gaussian"};
  int n_samples = 512;
  std::uint64_t seed = 0;
  GrfSpec field;  // grid is overridden by each resolution
  int k_max = 16;
  double t_min = 1e-3;
  double t_max = 1.0 - 1e-3;
};

struct GrfResolution {
  int grid = 0;
  double lambda_star = 0.0;
  std::vector<double> analytic;
  SpectrumReport truth;
  double truth_error = 0.0;  // truth samples against the analytic shell sums
};

struct GrfRun {
  int grid = 0;
  std::string schedule;
  int steps = 0;
  double error = 0.0;           // against the analytic shell sums
  double error_vs_truth = 0.0;  // against the sampled truth spectrum
  SpectrumReport spectrum;
};

struct GrfBenchResult {
  std::vector<GrfResolution> resolutions;
  std::vector<GrfRun> runs;
};

/// "linear" or "designed-gaussian" with lambda* the smallest field eigenvalue.
inline Schedule grf_bench_schedule(const std::string& name, double lambda_star) {
  if (name == "linear") return Schedule::linear();
  if (name == "designed-gaussian") return Schedule::designed_gaussian(lambda_star);
  throw ParameterError("grf bench: unsupported schedule '" + name + "'");
}

/// Sine coefficients of the interior of every field in `fields`.
inline SampleBatch to_sine_coefficients(const GaussianTarget& field, const SampleBatch& fields) {
  SampleBatch out(fields.size(), static_cast<Eigen::Index>(field.coefficient_count()), fields.t, fields.seed);
  parallel_for(0, static_cast<std::size_t>(fields.size()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    field.to_basis(fields.row(r), out.row(r));
  });
  return out;
}

inline SampleBatch from_sine_coefficients(const GaussianTarget& field, const SampleBatch& coefficients) {
  SampleBatch out(coefficients.size(), field.dim(), coefficients.t, coefficients.seed);
  parallel_for(0, static_cast<std::size_t>(coefficients.size()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    field.from_basis(coefficients.row(r), out.row(r));
  });
  return out;
}

/// Generates fields by integrating the exact Gaussian drift with RK4 from
/// white noise and compares shell spectra (bins 1..k_max) with the analytic
/// spectrum. The drift is diagonal in the sine basis, so the flow is run on
/// the sine coefficients of the noise and mapped back to the grid once.
/// Each resolution draws from its own seed stream.
inline GrfBenchResult grf_spectrum_bench(const GrfBenchConfig& cfg) {
  if (cfg.n_samples < 1) throw ParameterError("grf bench: n_samples must be >= 1");
  GrfBenchResult out;
  for (int grid : cfg.resolutions) {
    GrfSpec spec = cfg.field;
    spec.grid = grid;
    const auto field = spec.target();
    const Target target{field};
    const auto modal = GaussianTarget::diagonal({field.eigenvalues().begin(), field.eigenvalues().end()});
    const std::uint64_t seed = derive_seed(cfg.seed, Stream::Aux, static_cast<std::uint64_t>(grid));
    GrfResolution res;
    res.grid = grid;
    res.lambda_star = field.min_eigenvalue();
    res.analytic = expected_sine_spectrum(field);
    res.truth = spectrum(sample_target(target, cfg.n_samples, seed));
    res.truth_error = mean_relative_error(res.truth.energy, res.analytic, 1, cfg.k_max);
    const auto z = to_sine_coefficients(field, sample_noise(target, cfg.n_samples, seed));
    for (const auto& name : cfg.schedules) {
      const auto schedule = grf_bench_schedule(name, res.lambda_star);
      const auto drift = gaussian_drift(schedule, modal);
      for (int steps : cfg.steps) {
        IntegratorConfig ic;
        ic.method = Method::RK4;
        ic.steps = steps;
        ic.t_min = cfg.t_min;
        ic.t_max = cfg.t_max;
        SampleBatch init = z;
        init.states *= schedule.eval(cfg.t_min).alpha;
        init.t = cfg.t_min;
        GrfRun run;
        run.grid = grid;
        run.schedule = name;
        run.steps = steps;
        run.spectrum = spectrum(from_sine_coefficients(field, integrate_ode(drift, init, ic)));
        run.error = mean_relative_error(run.spectrum.energy, res.analytic, 1, cfg.k_max);
        run.error_vs_truth = mean_relative_error(run.spectrum.energy, res.truth.energy, 1, cfg.k_max);
        out.runs.push_back(std::move(run));
      }
    }
    out.resolutions.push_back(std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// KL invariance bench

struct KlBenchConfig {
  double m = 1.0;
  double delta = 0.2;
  std::vector<std::string> schedules = {"linear", "linear-trig", "designed-gaussian:0.01", "approx-minlip-gmm:2"};
  KlOptions quad;
  std::uint64_t seed = 0;
};

struct KlBenchRow {
  std::string schedule;
  KlReport report;
  double budget = 0.0;  // 3 (MC + quadrature) + truncation tail
};

struct KlBenchResult {
  std::vector<KlBenchRow> rows;
  double analytic = 0.0;
  double tail_bound = 0.0;
  double max_relative_spread = 0.0;
};

/// Estimated score built from the eta-form family
/// S_eta(y) = -y / (M + eta^2) + delta y / (M + eta^2)^2 through
/// s_t(x) = S_{alpha/beta}(x / beta) / beta.
inline ScoreOracle eta_family_score(const Schedule& schedule, double m, double delta) {
  return {"eta-family", 1, [schedule, m, delta](double t, std::span<const double> x, std::span<double> out) {
            const auto v = schedule.eval(t);
            if (!(v.beta > 0.0)) throw DomainError("eta-family score: beta vanishes");
            const double eta = v.alpha / v.beta;
            const double q = m + eta * eta;
            const double y = x[0] / v.beta;
            out[0] = (-y / q + delta * y / (q * q)) / v.beta;
          }};
}

/// 1D Gaussian N(0, M): KL* of the eta-family estimator is delta^2 / (2 M^2)
/// for every scalar schedule.
inline KlBenchResult kl_invariance_bench(const KlBenchConfig& cfg) {
  if (!(cfg.m > 0.0)) throw ParameterError("kl bench: M must be positive");
  const auto gauss = GaussianTarget::diagonal({cfg.m});
  const Target target{gauss};
  KlBenchResult out;
  out.analytic = cfg.delta * cfg.delta / (2.0 * cfg.m * cfg.m);
  out.tail_bound = cfg.delta * cfg.delta *
                   (std::pow(cfg.quad.eta_min, 2) / std::pow(cfg.m, 3) + 0.5 / std::pow(cfg.quad.eta_max, 4));
  for (const auto& name : cfg.schedules) {
    const auto schedule = schedule_from_string(name);
    const auto truth = gaussian_score(schedule, gauss);
    const auto est = eta_family_score(schedule, cfg.m, cfg.delta);
    KlBenchRow row;
    row.schedule = schedule.name();
    row.report = kl_star(schedule, truth, est, target, cfg.quad, cfg.seed);
    row.budget = 3.0 * (row.report.std_error + row.report.quad_error) + out.tail_bound;
    out.rows.push_back(row);
  }
  for (std::size_t a = 0; a < out.rows.size(); ++a)
    for (std::size_t b = a + 1; b < out.rows.size(); ++b) {
      const double ea = out.rows[a].report.estimate;
      const double eb = out.rows[b].report.estimate;
      const double scale = std::max(std::abs(ea), std::abs(eb));
      if (scale > 0.0) out.max_relative_spread = std::max(out.max_relative_spread, std::abs(ea - eb) / scale);
    }
  return out;
}

}  // namespace ilab
