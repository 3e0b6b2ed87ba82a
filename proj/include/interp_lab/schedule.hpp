#pragma once

// Interpolation schedules (alpha_t, beta_t) for I_t = alpha_t z + beta_t x1,
// their closed-form optimal instances, and the quadrature-based optimizer that
// tabulates the Lipschitz-optimal schedule for an arbitrary G function.

#include "interp_lab/core.hpp"
#include "interp_lab/numerics.hpp"
#include "interp_lab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace ilab {

struct ScheduleValue {
  double alpha;
  double beta;
  double alpha_dot;
  double beta_dot;
};

/// beta(t) and its derivative; paired with alpha = sqrt(1 - beta^2).
struct BetaCurve {
  std::string name;
  std::function<double(double)> beta;
  std::function<double(double)> beta_dot;

  static BetaCurve power(double exponent) {
    std::ostringstream os;
    os << "t^" << exponent;
    return {os.str(), [exponent](double t) { return std::pow(t, exponent); },
            [exponent](double t) { return exponent * std::pow(t, exponent - 1.0); }};
  }
};

struct LinearKind {};

struct TrigFromBetaKind {
  BetaCurve curve;
};

struct DesignedGaussianKind {
  double lambda_star;
};

struct ApproxMinLipGmmKind {
  double scale_m;
};

struct DilatedKind {
  double kappa;
  double scale_m;
};

/// Arbitrary (alpha, beta) pair with user-provided derivatives.
struct CustomPathKind {
  std::string name;
  std::function<ScheduleValue(double)> eval;
};

/// Monotone piecewise-cubic beta(t) on a sorted grid; alpha = sqrt(1 - beta^2).
class TabulatedSchedule {
 public:
  /// Slopes from the shape-preserving (PCHIP) estimate.
  TabulatedSchedule(std::vector<double> t_grid, std::vector<double> beta_grid)
      : t_(std::move(t_grid)), beta_(std::move(beta_grid)) {
    validate();
    slopes_ = num::pchip_slopes(t_, beta_);
    num::limit_monotone(t_, beta_, slopes_);
  }

  /// Caller-provided knot slopes; non-finite entries fall back to the PCHIP
  /// estimate and the result is limited to stay monotone.
  TabulatedSchedule(std::vector<double> t_grid, std::vector<double> beta_grid, std::vector<double> slopes)
      : t_(std::move(t_grid)), beta_(std::move(beta_grid)), slopes_(std::move(slopes)) {
    validate();
    if (slopes_.size() != t_.size()) throw ParameterError("TabulatedSchedule: slope count does not match grid");
    const auto fallback = num::pchip_slopes(t_, beta_);
    for (std::size_t i = 0; i < slopes_.size(); ++i) {
      if (!std::isfinite(slopes_[i]) || slopes_[i] < 0.0) slopes_[i] = fallback[i];
    }
    num::limit_monotone(t_, beta_, slopes_);
  }

  std::span<const double> t_grid() const { return t_; }
  std::span<const double> beta_grid() const { return beta_; }
  std::span<const double> slopes() const { return slopes_; }

  ScheduleValue eval(double t) const {
    const auto hv = num::hermite_eval(t_, beta_, slopes_, t);
    const double beta = std::clamp(hv.value, 0.0, 1.0);
    const double beta_dot = hv.derivative;
    const double alpha = std::sqrt(std::max(0.0, 1.0 - beta * beta));
    const double alpha_dot = alpha > 0.0 ? -beta * beta_dot / alpha : -std::numeric_limits<double>::infinity();
    return {alpha, beta, alpha_dot, beta_dot};
  }

 private:
  void validate() const {
    if (t_.size() < 2 || t_.size() != beta_.size())
      throw ParameterError("TabulatedSchedule: need matching t and beta grids with at least two points");
    if (t_.front() != 0.0 || t_.back() != 1.0) throw ParameterError("TabulatedSchedule: t grid must span [0, 1]");
    if (beta_.front() != 0.0 || beta_.back() != 1.0)
      throw ParameterError("TabulatedSchedule: beta must satisfy beta(0)=0 and beta(1)=1");
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
      if (!(t_[i + 1] > t_[i])) throw ParameterError("TabulatedSchedule: t grid must be strictly increasing");
      if (!(beta_[i + 1] > beta_[i])) throw ParameterError("TabulatedSchedule: beta grid must be strictly increasing");
    }
  }

  std::vector<double> t_;
  std::vector<double> beta_;
  std::vector<double> slopes_;
};

using ScheduleKind = std::variant<LinearKind, TrigFromBetaKind, DesignedGaussianKind, ApproxMinLipGmmKind, DilatedKind,
                                  TabulatedSchedule, CustomPathKind>;

namespace detail {

inline ScheduleValue trig_from_beta(double beta, double beta_dot) {
  const double alpha = std::sqrt(std::max(0.0, 1.0 - beta * beta));
  const double alpha_dot = alpha > 0.0 ? -beta * beta_dot / alpha : -std::numeric_limits<double>::infinity();
  return {alpha, beta, alpha_dot, beta_dot};
}

// alpha^2 + beta^2 lambda* = (lambda*)^t with alpha^2 + beta^2 = 1.
inline ScheduleValue designed_gaussian(double lambda_star, double t) {
  const double log_l = std::log(lambda_star);
  double alpha2, beta2, dbeta2;
  if (std::abs(lambda_star - 1.0) < 1e-6) {
    // Second-order series in log(lambda*) around the 0/0 point lambda* = 1.
    beta2 = t * (1.0 + (t - 1.0) * log_l / 2.0 + (t - 1.0) * (2.0 * t - 1.0) * log_l * log_l / 12.0);
    dbeta2 = 1.0 + (2.0 * t - 1.0) * log_l / 2.0 + (6.0 * t * t - 6.0 * t + 1.0) * log_l * log_l / 12.0;
    alpha2 = 1.0 - beta2;
  } else {
    const double denom = std::expm1(log_l);
    beta2 = std::expm1(t * log_l) / denom;
    alpha2 = std::exp(t * log_l) * std::expm1((1.0 - t) * log_l) / denom;
    dbeta2 = log_l * std::exp(t * log_l) / denom;
  }
  const double alpha = std::sqrt(std::max(0.0, alpha2));
  const double beta = std::sqrt(std::max(0.0, beta2));
  const double inf = std::numeric_limits<double>::infinity();
  const double beta_dot = beta > 0.0 ? dbeta2 / (2.0 * beta) : inf;
  const double alpha_dot = alpha > 0.0 ? -dbeta2 / (2.0 * alpha) : -inf;
  return {alpha, beta, alpha_dot, beta_dot};
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// beta_t = (1/M) sqrt(-log(1 + (e^{-M^2} - 1) t)), evaluated as
// -log((1 - t) + t e^{-M^2}) so that large M does not underflow.
inline ScheduleValue approx_min_lip(double m, double t) {
  const double m2 = m * m;
  const double log_t = t > 0.0 ? std::log(t) : -std::numeric_limits<double>::infinity();
  const double log_one_minus_t = t < 1.0 ? std::log1p(-t) : -std::numeric_limits<double>::infinity();
  const double v = -log_add_exp(log_one_minus_t, log_t - m2);
  const double beta = std::min(1.0, std::sqrt(std::max(0.0, v)) / m);
  const double alpha = std::sqrt(std::max(0.0, (m2 - v) / m2));
  // dv/dt = (1 - e^{-M^2}) e^{v}
  const double dv = -std::expm1(-m2) * std::exp(v);
  const double inf = std::numeric_limits<double>::infinity();
  const double beta_dot = beta > 0.0 ? dv / (2.0 * m2 * beta) : inf;
  const double alpha_dot = alpha > 0.0 ? -dv / (2.0 * m2 * alpha) : -inf;
  return {alpha, beta, alpha_dot, beta_dot};
}

inline ScheduleValue dilated(double kappa, double m, double t) {
  const double ratio = kappa / m;
  if (t <= 0.5) return trig_from_beta(2.0 * ratio * t, 2.0 * ratio);
  return trig_from_beta(ratio + (1.0 - ratio) * (2.0 * t - 1.0), 2.0 * (1.0 - ratio));
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace detail

/// Immutable schedule value. Safe to share across threads.
class Schedule {
 public:
  static Schedule linear() { return Schedule(LinearKind{}); }

  static Schedule trig_from_beta(BetaCurve curve) {
    if (!curve.beta || !curve.beta_dot) throw ParameterError("trig schedule: beta curve is empty");
    if (std::abs(curve.beta(0.0)) > 1e-12 || std::abs(curve.beta(1.0) - 1.0) > 1e-12)
      throw ParameterError("trig schedule: beta curve must satisfy beta(0)=0, beta(1)=1");
    return Schedule(TrigFromBetaKind{std::move(curve)});
  }

  /// alpha = sqrt(1 - t^2), beta = t.
  static Schedule linear_trig() { return trig_from_beta(BetaCurve::power(1.0)); }

  static Schedule designed_gaussian(double lambda_star) {
    if (!(lambda_star > 0.0) || !std::isfinite(lambda_star))
      throw ParameterError("designed-gaussian schedule: lambda* must be positive");
    return Schedule(DesignedGaussianKind{lambda_star});
  }

  static Schedule approx_min_lip_gmm(double scale_m) {
    if (!(scale_m > 0.0) || !std::isfinite(scale_m))
      throw ParameterError("approx-minlip-gmm schedule: scale M must be positive");
    return Schedule(ApproxMinLipGmmKind{scale_m});
  }

  static Schedule dilated(double kappa, double scale_m) {
    if (!(kappa > 0.0) || !(scale_m > 0.0) || !(kappa < scale_m))
      throw ParameterError("dilated schedule: need 0 < kappa < M");
    return Schedule(DilatedKind{kappa, scale_m});
  }

  static Schedule tabulated(TabulatedSchedule table) { return Schedule(std::move(table)); }

  static Schedule custom(std::string name, std::function<ScheduleValue(double)> eval) {
    const auto v0 = eval(0.0);
    const auto v1 = eval(1.0);
    if (std::abs(v0.alpha - 1.0) > 1e-12 || std::abs(v0.beta) > 1e-12 || std::abs(v1.alpha) > 1e-12 ||
        std::abs(v1.beta - 1.0) > 1e-12)
      throw ParameterError("custom schedule: boundary conditions violated");
    return Schedule(CustomPathKind{std::move(name), std::move(eval)});
  }

  ScheduleValue eval(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
      std::ostringstream os;
      os << "schedule evaluated outside [0,1]: t=" << t;
      throw DomainError(os.str());
    }
    return std::visit(
        detail::overloaded{
            [t](const LinearKind&) { return ScheduleValue{1.0 - t, t, -1.0, 1.0}; },
            [t](const TrigFromBetaKind& k) { return detail::trig_from_beta(k.curve.beta(t), k.curve.beta_dot(t)); },
            [t](const DesignedGaussianKind& k) { return detail::designed_gaussian(k.lambda_star, t); },
            [t](const ApproxMinLipGmmKind& k) { return detail::approx_min_lip(k.scale_m, t); },
            [t](const DilatedKind& k) { return detail::dilated(k.kappa, k.scale_m, t); },
            [t](const TabulatedSchedule& k) { return k.eval(t); },
            [t](const CustomPathKind& k) { return k.eval(t); },
        },
        kind_);
  }

  /// True when alpha^2 + beta^2 = 1 by construction.
  bool is_trig() const {
    return !std::holds_alternative<LinearKind>(kind_) && !std::holds_alternative<CustomPathKind>(kind_);
  }

  bool is_linear() const { return std::holds_alternative<LinearKind>(kind_); }

  const ScheduleKind& kind() const { return kind_; }

  std::string name() const {
    std::ostringstream os;
    os.precision(6);
    std::visit(detail::overloaded{
                   [&](const LinearKind&) { os << "linear"; },
                   [&](const TrigFromBetaKind& k) { os << "trig(beta=" << k.curve.name << ")"; },
                   [&](const DesignedGaussianKind& k) { os << "designed-gaussian(lambda*=" << k.lambda_star << ")"; },
                   [&](const ApproxMinLipGmmKind& k) { os << "approx-minlip-gmm(M=" << k.scale_m << ")"; },
                   [&](const DilatedKind& k) { os << "dilated(kappa=" << k.kappa << ",M=" << k.scale_m << ")"; },
                   [&](const TabulatedSchedule& k) { os << "tabulated(" << k.t_grid().size() << ")"; },
                   [&](const CustomPathKind& k) { os << k.name; },
               },
               kind_);
    return os.str();
  }

 private:
  explicit Schedule(ScheduleKind kind) : kind_(std::move(kind)) {}
  ScheduleKind kind_;
};

inline ScheduleValue eval_schedule(const Schedule& s, double t) { return s.eval(t); }

/// Parses "linear", "linear-trig", "trig-power:<a>", "designed-gaussian:<lambda*>",
/// "approx-minlip-gmm:<M>" and "dilated:<kappa>:<M>".
inline Schedule schedule_from_string(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.empty()) throw ParameterError("schedule: empty description");
  auto number = [&](std::size_t i) {
    if (i >= parts.size()) throw ParameterError("schedule '" + text + "': missing parameter");
    try {
      std::size_t used = 0;
      const double v = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
      return v;
    } catch (const std::logic_error&) {
      throw ParameterError("schedule '" + text + "': bad number '" + parts[i] + "'");
    }
  };
  auto expect = [&](std::size_t n) {
    if (parts.size() != n) throw ParameterError("schedule '" + text + "': wrong number of parameters");
  };
  const auto& kind = parts[0];
  if (kind == "linear") return expect(1), Schedule::linear();
  if (kind == "linear-trig") return expect(1), Schedule::linear_trig();
  if (kind == "trig-power") return expect(2), Schedule::trig_from_beta(BetaCurve::power(number(1)));
  if (kind == "designed-gaussian") return expect(2), Schedule::designed_gaussian(number(1));
  if (kind == "approx-minlip-gmm") return expect(2), Schedule::approx_min_lip_gmm(number(1));
  if (kind == "dilated") return expect(3), Schedule::dilated(number(1), number(2));
  throw ParameterError("schedule: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Optimal schedules from a G function.

using GFunction = std::function<double(double)>;

/// Mixture: t(beta) ~ int_0^beta u G(u)^{1/2k} du (alpha = sqrt(1-beta^2) with
/// the Lipschitz integrand written as beta_dot^2 beta^2 G(beta)).
/// General: t(beta) ~ int_0^beta G(u)^{1/2k} du.
enum class WeightMode { Mixture, General };

struct OptimizerOptions {
  int k = 1;
  int grid_size = 512;
  WeightMode weight = WeightMode::Mixture;
};

inline double optimizer_weight(WeightMode mode, double u, double g, int k) {
  const double root = (k == 1) ? std::sqrt(g) : std::pow(g, 1.0 / (2.0 * k));
  return mode == WeightMode::Mixture ? u * root : root;
}

/// Tabulates the minimizer of int beta_dot^2 (beta^2) G(beta) dt (power 2k
/// variant) by cumulative Simpson quadrature of the Beltrami first integral
/// on a uniform beta grid, then inverts t(beta) with a monotone cubic whose
/// knot slopes are the exact dbeta/dt = Z / w(beta).
inline TabulatedSchedule solve_optimal_schedule(const GFunction& g, const OptimizerOptions& opt = {}) {
  if (opt.k < 1) throw ParameterError("solve_optimal_schedule: k must be >= 1");
  if (opt.grid_size < 3) throw ParameterError("solve_optimal_schedule: grid size must be >= 3");
  const std::size_t n = static_cast<std::size_t>(opt.grid_size);
  const double h = 1.0 / static_cast<double>(n - 1);

  // Nodes 0..n-1 at u = i h, midpoints n..2n-2 at u = (i + 1/2) h.
  std::vector<double> u(2 * n - 1), gval(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) u[i] = static_cast<double>(i) * h;
  u[n - 1] = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) u[n + i] = (static_cast<double>(i) + 0.5) * h;
  parallel_for(0, u.size(), [&](std::size_t i) { gval[i] = g(u[i]); });
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(gval[i]) || gval[i] < 0.0) {
      std::ostringstream os;
      os << "solve_optimal_schedule: G(" << u[i] << ") = " << gval[i] << " is not a finite nonnegative value";
      throw OracleError(os.str());
    }
  }
  auto w = [&](std::size_t i) { return optimizer_weight(opt.weight, u[i], gval[i], opt.k); };

  std::vector<double> cumulative(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double inc = h / 6.0 * (w(i) + 4.0 * w(n + i) + w(i + 1));
    if (!(inc > 0.0)) {
      std::ostringstream os;
      os << "solve_optimal_schedule: weight vanishes on [" << u[i] << ", " << u[i + 1]
         << "]; cumulative map is not invertible";
      throw DegenerateError(os.str());
    }
    cumulative[i + 1] = cumulative[i] + inc;
  }
  const double total = cumulative.back();
  std::vector<double> t(n), beta(n), slope(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = cumulative[i] / total;
    beta[i] = u[i];
    const double wi = w(i);
    slope[i] = wi > 0.0 ? total / wi : std::numeric_limits<double>::quiet_NaN();
  }
  t.front() = 0.0;
  t.back() = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(t[i + 1] > t[i])) throw DegenerateError("solve_optimal_schedule: cumulative map lost strict monotonicity");
  }
  return TabulatedSchedule(std::move(t), std::move(beta), std::move(slope));
}

struct ElResidual {
  std::vector<double> t;
  std::vector<double> residual;
  double mean_level = 0.0;

  double max_abs() const {
    double m = 0.0;
    for (double r : residual) m = std::max(m, std::abs(r));
    return m;
  }
  double max_relative() const { return max_abs() / std::abs(mean_level); }
};

/// beta_dot * (beta) * G(beta)^{1/2k} on the interior of t_grid, centred by
/// its mean. The Beltrami identity makes this constant for an optimal schedule.
inline ElResidual euler_lagrange_residual(const Schedule& s, const GFunction& g, int k, std::span<const double> t_grid,
                                          WeightMode mode = WeightMode::Mixture) {
  if (k < 1) throw ParameterError("euler_lagrange_residual: k must be >= 1");
  ElResidual out;
  std::vector<double> values;
  for (double t : t_grid) {
    if (!(t > 0.0 && t < 1.0)) continue;
    const auto v = s.eval(t);
    const double q = v.beta_dot * optimizer_weight(mode, v.beta, g(v.beta), k);
    if (!std::isfinite(q)) throw OracleError("euler_lagrange_residual: non-finite first integral");
    out.t.push_back(t);
    values.push_back(q);
  }
  if (values.empty()) throw ParameterError("euler_lagrange_residual: no interior grid points");
  out.mean_level = num::pairwise_sum(values) / static_cast<double>(values.size());
  out.residual.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.residual[i] = values[i] - out.mean_level;
  return out;
}

}  // namespace ilab
