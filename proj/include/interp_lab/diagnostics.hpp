#pragma once

// Scalar functionals of a drift along its interpolant (averaged squared
// Lipschitz constant, kinetic energy, KL after optimal diffusion tuning), the
// G function that drives the schedule optimizer, and shell-binned spectra of
// field samples.

#include "interp_lab/core.hpp"
#include "interp_lab/drift.hpp"
#include "interp_lab/numerics.hpp"
#include "interp_lab/parallel.hpp"
#include "interp_lab/rng.hpp"
#include "interp_lab/schedule.hpp"
#include "interp_lab/sine_transform.hpp"
#include "interp_lab/targets.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace ilab {

struct LipReport {
  double a2 = 0.0;
  double std_error = 0.0;
  int t_grid_size = 0;
  int mc_per_t = 0;
  double sup_lipschitz = 0.0;
};

struct EnergyReport {
  double value = 0.0;
  double std_error = 0.0;
  int t_grid_size = 0;
  int mc_per_t = 0;
};

namespace detail {

struct NodeAverage {
  double mean;
  double variance;
  double max;
};

// Midpoint rule over t of E[f(t, I_t)], with I_t drawn independently at each
// node from the stream seeded by (seed, node).
template <class F>
std::vector<NodeAverage> midpoint_nodes(const Schedule& schedule, const Target& target, int nodes, int mc,
                                        std::uint64_t seed, F&& f) {
  if (nodes < 1 || mc < 1) throw ParameterError("diagnostics: t grid size and samples per node must be >= 1");
  std::vector<NodeAverage> out(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    const double t = (i + 0.5) / nodes;
    const auto batch = sample_interpolant(schedule, target, t, mc, derive_seed(seed, Stream::Aux, i));
    std::vector<double> vals(static_cast<std::size_t>(mc));
    parallel_for(0, vals.size(), [&](std::size_t r) { vals[r] = f(t, batch.row(static_cast<Eigen::Index>(r))); });
    for (double v : vals) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "diagnostics: non-finite integrand at t=" << t;
        throw OracleError(os.str());
      }
    }
    const auto st = num::mean_stat(vals);
    out[static_cast<std::size_t>(i)] = {st.mean, st.variance, *std::max_element(vals.begin(), vals.end())};
  }
  return out;
}

inline std::pair<double, double> combine_midpoint(const std::vector<NodeAverage>& nodes, int mc) {
  const double w = 1.0 / static_cast<double>(nodes.size());
  std::vector<double> means(nodes.size()), vars(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    means[i] = w * nodes[i].mean;
    vars[i] = w * w * nodes[i].variance / mc;
  }
  return {num::pairwise_sum(means), std::sqrt(num::pairwise_sum(vars))};
}

}  // namespace detail

/// A2 = int_0^1 E ||grad b_t(I_t)||_2^2 dt.
inline LipReport avg_lip2(const DriftOracle& drift, const Schedule& schedule, const Target& target,
                          int t_grid_size = 128, int mc_per_t = 256, std::uint64_t seed = 0) {
  const auto nodes = detail::midpoint_nodes(schedule, target, t_grid_size, mc_per_t, seed,
                                            [&](double t, std::span<const double> x) {
                                              const double n = drift.jacobian_norm(t, x);
                                              return n * n;
                                            });
  LipReport out;
  std::tie(out.a2, out.std_error) = detail::combine_midpoint(nodes, mc_per_t);
  out.t_grid_size = t_grid_size;
  out.mc_per_t = mc_per_t;
  for (const auto& n : nodes) out.sup_lipschitz = std::max(out.sup_lipschitz, std::sqrt(n.max));
  return out;
}

/// P = int_0^1 E ||b_t(I_t)||^2 dt.
inline EnergyReport kinetic_energy(const DriftOracle& drift, const Schedule& schedule, const Target& target,
                                   int t_grid_size = 128, int mc_per_t = 256, std::uint64_t seed = 0) {
  const auto nodes = detail::midpoint_nodes(schedule, target, t_grid_size, mc_per_t, seed,
                                            [&](double t, std::span<const double> x) {
                                              std::vector<double> b(x.size());
                                              drift.eval(t, x, b);
                                              double s = 0.0;
                                              for (double v : b) s += v * v;
                                              return s;
                                            });
  EnergyReport out;
  std::tie(out.value, out.std_error) = detail::combine_midpoint(nodes, mc_per_t);
  out.t_grid_size = t_grid_size;
  out.mc_per_t = mc_per_t;
  return out;
}

// ---------------------------------------------------------------------------
// KL after optimal diffusion tuning

struct KlOptions {
  int quad_points = 257;  // must be 1 mod 4 so the half-resolution rule is also Simpson
  int mc_per_t = 2000;
  double eta_min = 1e-3;
  double eta_max = 1e3;
};

struct KlReport {
  double estimate = 0.0;
  double std_error = 0.0;
  double quad_error = 0.0;  // |full - half resolution|
  int quad_points = 0;
  int mc_per_t = 0;
};

/// Time t at which alpha_t / beta_t = eta.
inline double time_for_ratio(const Schedule& schedule, double eta) {
  const double target = std::log(eta);
  return num::bisect(
      [&](double t) {
        const auto v = schedule.eval(t);
        return std::log(v.alpha) - std::log(v.beta) - target;
      },
      0.0, 1.0, 200);
}

/// KL* = 2 int eps_t E ||s_t(I_t) - s_hat_t(I_t)||^2 dt, integrated in
/// u = log(alpha/beta) over [log eta_min, log eta_max] by composite Simpson.
/// In that variable eps_t |dt/deta| eta = alpha beta eta. Node i draws its
/// samples from (seed, i), so different schedules share random numbers at
/// matching eta.
inline KlReport kl_star(const Schedule& schedule, const ScoreOracle& true_score, const ScoreOracle& est_score,
                        const Target& target, const KlOptions& opt = {}, std::uint64_t seed = 0) {
  if (opt.quad_points < 5 || opt.quad_points % 4 != 1)
    throw ParameterError("kl_star: quad_points must be >= 5 and equal 1 mod 4");
  if (!(opt.eta_min > 0.0 && opt.eta_min < opt.eta_max)) throw ParameterError("kl_star: need 0 < eta_min < eta_max");
  if (opt.mc_per_t < 2) throw ParameterError("kl_star: mc_per_t must be >= 2");
  const auto n = static_cast<std::size_t>(opt.quad_points);
  const double u0 = std::log(opt.eta_min);
  const double h = (std::log(opt.eta_max) - u0) / static_cast<double>(n - 1);
  std::vector<double> mean(n), var(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double eta = std::exp(u0 + static_cast<double>(i) * h);
    const double t = time_for_ratio(schedule, eta);
    const auto v = schedule.eval(t);
    const double weight = 2.0 * v.alpha * v.beta * eta;
    const auto batch = sample_interpolant(schedule, target, t, opt.mc_per_t, derive_seed(seed, Stream::Aux, i));
    std::vector<double> vals(static_cast<std::size_t>(opt.mc_per_t));
    parallel_for(0, vals.size(), [&](std::size_t r) {
      const auto x = batch.row(static_cast<Eigen::Index>(r));
      std::vector<double> a(x.size()), b(x.size());
      true_score.eval(t, x, a);
      est_score.eval(t, x, b);
      double s = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
      vals[r] = weight * s;
    });
    const auto st = num::mean_stat(vals);
    if (!std::isfinite(st.mean)) {
      std::ostringstream os;
      os << "kl_star: non-finite integrand at t=" << t;
      throw SingularityError(os.str(), t);
    }
    mean[i] = st.mean;
    var[i] = st.variance / opt.mc_per_t;
  }
  const auto w = num::simpson_weights(n, h);
  const auto wc = num::simpson_weights((n + 1) / 2, 2.0 * h);
  std::vector<double> full(n), half((n + 1) / 2), err(n);
  for (std::size_t i = 0; i < n; ++i) {
    full[i] = w[i] * mean[i];
    err[i] = w[i] * w[i] * var[i];
  }
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = wc[i] * mean[2 * i];
  KlReport out;
  out.estimate = num::pairwise_sum(full);
  out.std_error = std::sqrt(num::pairwise_sum(err));
  out.quad_error = std::abs(out.estimate - num::pairwise_sum(half));
  out.quad_points = opt.quad_points;
  out.mc_per_t = opt.mc_per_t;
  return out;
}

// ---------------------------------------------------------------------------
// G function for the schedule optimizer

struct GSpec {
  GFunction g;
  WeightMode mode;
};

/// Bimodal targets: G(u) = E sech^{4k}(h + u <r, sqrt(1-u^2) z + u x1>),
/// evaluated through the scalar law of <r, .>, for the mixture weight.
/// Other targets: G(u) = E ||F(u, I_u)||^{2k} where F is the Jacobian of the
/// drift transferred from `reference` (linear schedule) to beta = t,
/// alpha = sqrt(1 - t^2), for the general weight. The same random numbers are
/// reused for every u. u is clamped to [1e-7, 1 - 1e-7] in the general form,
/// where the transferred Jacobian is 0/0 at u = 1.
inline GSpec g_function_for_optimizer(const Target& target, const DriftOracle* reference, int k, int mc_samples = 4096,
                                      std::uint64_t seed = 0) {
  if (k < 1) throw ParameterError("g_function_for_optimizer: k must be >= 1");
  if (mc_samples < 1) throw ParameterError("g_function_for_optimizer: mc_samples must be >= 1");
  if (const auto* b = std::get_if<BimodalGmmTarget>(&target)) {
    const double r = b->r_norm();
    const double h = b->h();
    const double p = b->p();
    auto xi = std::make_shared<std::vector<double>>(static_cast<std::size_t>(mc_samples));
    auto x1 = std::make_shared<std::vector<double>>(static_cast<std::size_t>(mc_samples));
    for (std::size_t i = 0; i < xi->size(); ++i) {
      Rng rng(seed, Stream::Aux, i);
      (*xi)[i] = rng.normal();
      const double sign = rng.uniform() < p ? 1.0 : -1.0;
      (*x1)[i] = sign * r + rng.normal();
    }
    return {[=](double u) {
              std::vector<double> vals(xi->size());
              const double a = std::sqrt(std::max(0.0, 1.0 - u * u));
              for (std::size_t i = 0; i < vals.size(); ++i) {
                const double s = num::sech(h + u * r * (a * (*xi)[i] + u * (*x1)[i]));
                vals[i] = std::pow(s, 4 * k);
              }
              return num::pairwise_sum(vals) / static_cast<double>(vals.size());
            },
            WeightMode::Mixture};
  }
  if (reference == nullptr)
    throw ParameterError("g_function_for_optimizer: a linear-schedule reference drift is required for this target");
  const auto moved = transfer_drift(*reference, Schedule::linear_trig());
  auto z = std::make_shared<SampleBatch>(sample_noise(target, mc_samples, seed));
  auto x1 = std::make_shared<SampleBatch>(sample_target(target, mc_samples, seed));
  return {[=](double u) {
            const double uc = std::clamp(u, 1e-7, 1.0 - 1e-7);
            const double a = std::sqrt(1.0 - uc * uc);
            std::vector<double> vals(static_cast<std::size_t>(z->size()));
            parallel_for(0, vals.size(), [&](std::size_t i) {
              const auto r = static_cast<Eigen::Index>(i);
              const Eigen::VectorXd x = a * z->states.row(r).transpose() + uc * x1->states.row(r).transpose();
              const double nrm = moved.jacobian_norm(uc, {x.data(), static_cast<std::size_t>(x.size())});
              vals[i] = std::pow(nrm, 2 * k);
            });
            return num::pairwise_sum(vals) / static_cast<double>(vals.size());
          },
          WeightMode::General};
}

// ---------------------------------------------------------------------------
// Spectra

enum class TransformKind { Fourier, Sine };

struct SpectrumReport {
  std::vector<int> k;
  std::vector<double> energy;
  std::size_t sample_count = 0;
  double total_energy = 0.0;  // mean squared coefficient mass per sample
  TransformKind transform = TransformKind::Sine;
};

inline int field_grid(Eigen::Index d) {
  const auto n = static_cast<int>(std::llround(std::sqrt(static_cast<double>(d))));
  if (static_cast<Eigen::Index>(n) * n != d) throw ShapeError("spectrum: samples are not square fields");
  return n;
}

namespace detail {

inline std::size_t shell(double radius) { return static_cast<std::size_t>(std::floor(radius)); }

// Per-sample shell energies. Sine: interior DST-I with modes starting at 1.
// Fourier: unitary DFT of the full grid with signed frequencies.
inline std::vector<double> shell_energy(std::span<const double> field, int n, TransformKind kind, std::size_t bins) {
  std::vector<double> e(bins, 0.0);
  if (kind == TransformKind::Sine) {
    const int m = n - 2;
    const auto inner = fft::interior(field, n);
    std::vector<double> c(inner.size());
    fft::dst1_2d(inner, c, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        const double v = c[static_cast<std::size_t>(a) * m + b];
        e[shell(std::hypot(a + 1.0, b + 1.0))] += v * v;
      }
  } else {
    const auto c = fft::dft_2d(field, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const int fa = a <= n / 2 ? a : a - n;
        const int fb = b <= n / 2 ? b : b - n;
        e[shell(std::hypot(fa, fb))] += std::norm(c[static_cast<std::size_t>(a) * n + b]);
      }
  }
  return e;
}

inline std::size_t bin_count(int n, TransformKind kind) {
  if (kind == TransformKind::Sine) return shell(std::hypot(n - 2.0, n - 2.0)) + 1;
  return shell(std::hypot(n / 2.0, n / 2.0)) + 1;
}

}  // namespace detail

/// E(k) = sum over k <= |m| < k+1 of |u_hat(m)|^2, averaged over samples.
inline SpectrumReport spectrum(const SampleBatch& samples, TransformKind kind = TransformKind::Sine) {
  const int n = field_grid(samples.dim());
  if (kind == TransformKind::Sine && n < 3) throw ShapeError("spectrum: sine transform needs N >= 3");
  const std::size_t bins = detail::bin_count(n, kind);
  const auto count = static_cast<std::size_t>(samples.size());
  std::vector<std::vector<double>> per(count);
  parallel_for(0, count, [&](std::size_t i) {
    per[i] = detail::shell_energy(samples.row(static_cast<Eigen::Index>(i)), n, kind, bins);
  });
  SpectrumReport out;
  out.transform = kind;
  out.sample_count = count;
  out.k.resize(bins);
  out.energy.resize(bins);
  std::vector<double> col(count);
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t i = 0; i < count; ++i) col[i] = per[i][b];
    out.k[b] = static_cast<int>(b);
    out.energy[b] = num::pairwise_sum(col) / static_cast<double>(count);
  }
  out.total_energy = num::pairwise_sum(out.energy);
  return out;
}

/// Expected sine-basis shell energies of a grid Gaussian target.
inline std::vector<double> expected_sine_spectrum(const GaussianTarget& target) {
  if (target.basis() != BasisKind::Sine) throw ContractError("expected_sine_spectrum: target is not a grid field");
  const int n = target.grid();
  const int m = n - 2;
  std::vector<double> e(detail::bin_count(n, TransformKind::Sine), 0.0);
  const auto eig = target.eigenvalues();
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) e[detail::shell(std::hypot(a + 1.0, b + 1.0))] += eig[static_cast<std::size_t>(a) * m + b];
  return e;
}

/// Mean of |E(k) - ref(k)| / ref(k) over bins k_lo..k_hi with ref(k) > 0.
inline double mean_relative_error(std::span<const double> energy, std::span<const double> reference, int k_lo,
                                  int k_hi) {
  std::vector<double> rel;
  for (int k = k_lo; k <= k_hi && static_cast<std::size_t>(k) < std::min(energy.size(), reference.size()); ++k) {
    const double ref = reference[static_cast<std::size_t>(k)];
    if (ref > 0.0) rel.push_back(std::abs(energy[static_cast<std::size_t>(k)] - ref) / ref);
  }
  if (rel.empty()) throw ParameterError("mean_relative_error: no populated bins in range");
  return num::pairwise_sum(rel) / static_cast<double>(rel.size());
}

}  // namespace ilab
