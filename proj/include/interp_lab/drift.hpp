#pragma once

// Drift, score and diffusion-coefficient oracles, the affine drift/score
// conversions, and the transfer of a linear-schedule drift to any other
// scalar schedule.

#include "interp_lab/core.hpp"
#include "interp_lab/parallel.hpp"
#include "interp_lab/schedule.hpp"
#include "interp_lab/targets.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ilab {

using VectorField = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using JacobianFn = std::function<Eigen::MatrixXd(double t, std::span<const double> x)>;
using NormFn = std::function<double(double t, std::span<const double> x)>;

struct PowerIterationOptions {
  int iterations = 20;
  double tolerance = 1e-6;
  // Below this dimension the spectral norm is computed exactly by SVD.
  int dense_limit = 64;
};

/// b_t(x) for a fixed target and schedule. Pure and shareable across threads.
class DriftOracle {
 public:
  DriftOracle(std::string name, std::string schedule_name, int dim, VectorField eval, JacobianFn jacobian = {},
              NormFn jacobian_norm = {})
      : name_(std::move(name)),
        schedule_(std::move(schedule_name)),
        dim_(dim),
        eval_(std::move(eval)),
        jac_(std::move(jacobian)),
        norm_(std::move(jacobian_norm)) {}

  const std::string& name() const { return name_; }
  const std::string& schedule_name() const { return schedule_; }
  int dim() const { return dim_; }
  bool has_jacobian() const { return static_cast<bool>(jac_); }
  bool has_jacobian_norm() const { return static_cast<bool>(norm_); }

  void eval(double t, std::span<const double> x, std::span<double> out) const { eval_(t, x, out); }

  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(x.size());
    eval_(t, {x.data(), static_cast<std::size_t>(x.size())}, {out.data(), static_cast<std::size_t>(out.size())});
    return out;
  }

  RowMatrix eval_batch(double t, const RowMatrix& x) const {
    RowMatrix out(x.rows(), x.cols());
    parallel_for(0, static_cast<std::size_t>(x.rows()), [&](std::size_t i) {
      const auto r = static_cast<Eigen::Index>(i);
      eval_(t, {x.data() + r * x.cols(), static_cast<std::size_t>(x.cols())},
            {out.data() + r * x.cols(), static_cast<std::size_t>(x.cols())});
    });
    return out;
  }

  /// Analytic Jacobian when available, else central differences with step
  /// 1e-5 (1 + |x_i|) per coordinate.
  Eigen::MatrixXd jacobian(double t, std::span<const double> x) const {
    if (jac_) return jac_(t, x);
    return fd_jacobian(t, x);
  }

  Eigen::MatrixXd fd_jacobian(double t, std::span<const double> x) const {
    const auto d = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd j(d, d);
    Eigen::VectorXd xp = as_vector(x);
    Eigen::VectorXd xm = xp;
    Eigen::VectorXd fp(d), fm(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      const double h = 1e-5 * (1.0 + std::abs(x[static_cast<std::size_t>(c)]));
      xp[c] += h;
      xm[c] -= h;
      fp = eval(t, xp);
      fm = eval(t, xm);
      j.col(c) = (fp - fm) / (2.0 * h);
      xp[c] = xm[c] = x[static_cast<std::size_t>(c)];
    }
    return j;
  }

  /// Jacobian-vector product; central difference along v when no analytic
  /// Jacobian exists.
  Eigen::VectorXd jvp(double t, std::span<const double> x, const Eigen::VectorXd& v) const {
    if (jac_) return jac_(t, x) * v;
    const double vn = v.norm();
    if (vn == 0.0) return Eigen::VectorXd::Zero(v.size());
    const double h = 1e-5 * (1.0 + as_vector(x).norm()) / vn;
    const Eigen::VectorXd xp = as_vector(x) + h * v;
    const Eigen::VectorXd xm = as_vector(x) - h * v;
    return (eval(t, xp) - eval(t, xm)) / (2.0 * h);
  }

  /// Spectral norm of the Jacobian at (t, x).
  double jacobian_norm(double t, std::span<const double> x, const PowerIterationOptions& opt = {}) const {
    if (norm_) return norm_(t, x);
    const Eigen::MatrixXd j = jacobian(t, x);
    return spectral_norm(j, opt);
  }

  static double spectral_norm(const Eigen::MatrixXd& j, const PowerIterationOptions& opt = {}) {
    if (!j.allFinite()) throw OracleError("jacobian_norm: non-finite Jacobian entries");
    if (j.rows() == 1 && j.cols() == 1) return std::abs(j(0, 0));
    if (j.rows() <= opt.dense_limit) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
      return svd.singularValues()(0);
    }
    // Power iteration on J^T J.
    Eigen::VectorXd v = Eigen::VectorXd::Ones(j.cols()).normalized();
    double sigma2 = 0.0;
    for (int it = 0; it < opt.iterations; ++it) {
      Eigen::VectorXd w = j.transpose() * (j * v);
      const double next = w.norm();
      if (next == 0.0) return 0.0;
      v = w / next;
      const bool done = std::abs(next - sigma2) <= opt.tolerance * next;
      sigma2 = next;
      if (done) break;
    }
    return std::sqrt(sigma2);
  }

 private:
  std::string name_;
  std::string schedule_;
  int dim_;
  VectorField eval_;
  JacobianFn jac_;
  NormFn norm_;
};

/// Score of the interpolant density, grad log rho_t(x).
class ScoreOracle {
 public:
  ScoreOracle(std::string name, int dim, VectorField eval) : name_(std::move(name)), dim_(dim), eval_(std::move(eval)) {}

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  void eval(double t, std::span<const double> x, std::span<double> out) const { eval_(t, x, out); }

  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(x.size());
    eval_(t, {x.data(), static_cast<std::size_t>(x.size())}, {out.data(), static_cast<std::size_t>(out.size())});
    return out;
  }

 private:
  std::string name_;
  int dim_;
  VectorField eval_;
};

// ---------------------------------------------------------------------------
// Gaussian targets

/// (alpha alpha_dot + beta beta_dot lambda) / (alpha^2 + beta^2 lambda).
inline double gaussian_multiplier(const ScheduleValue& v, double lambda) {
  return (v.alpha * v.alpha_dot + v.beta * v.beta_dot * lambda) / (v.alpha * v.alpha + v.beta * v.beta * lambda);
}

namespace detail {

inline void apply_diagonal(const GaussianTarget& g, std::span<const double> x, std::span<double> out,
                           const std::function<double(double)>& factor) {
  std::vector<double> c(g.coefficient_count());
  g.to_basis(x, c);
  const auto eig = g.eigenvalues();
  for (std::size_t j = 0; j < c.size(); ++j) c[j] *= factor(eig[j]);
  g.from_basis(c, out);
}

inline Eigen::MatrixXd diagonal_matrix(const GaussianTarget& g, const std::function<double(double)>& factor) {
  const auto eig = g.eigenvalues();
  Eigen::VectorXd diag(static_cast<Eigen::Index>(eig.size()));
  for (std::size_t j = 0; j < eig.size(); ++j) diag[static_cast<Eigen::Index>(j)] = factor(eig[j]);
  if (g.basis() == BasisKind::Identity) return diag.asDiagonal();
  if (g.basis() == BasisKind::Orthogonal) return g.basis_matrix() * diag.asDiagonal() * g.basis_matrix().transpose();
  throw ContractError("dense Jacobian is not formed for grid targets");
}

}  // namespace detail

inline DriftOracle gaussian_drift(const Schedule& schedule, const GaussianTarget& target) {
  auto eval = [schedule, target](double t, std::span<const double> x, std::span<double> out) {
    const auto v = schedule.eval(t);
    detail::apply_diagonal(target, x, out, [&](double l) { return gaussian_multiplier(v, l); });
  };
  JacobianFn jac;
  if (target.basis() != BasisKind::Sine) {
    jac = [schedule, target](double t, std::span<const double>) {
      const auto v = schedule.eval(t);
      return detail::diagonal_matrix(target, [&](double l) { return gaussian_multiplier(v, l); });
    };
  }
  // The multiplier is monotone in lambda, so the extreme eigenvalues suffice.
  auto norm = [schedule, lo = target.min_eigenvalue(), hi = target.max_eigenvalue()](double t,
                                                                                     std::span<const double>) {
    const auto v = schedule.eval(t);
    return std::max(std::abs(gaussian_multiplier(v, lo)), std::abs(gaussian_multiplier(v, hi)));
  };
  return {"gaussian", schedule.name(), target.dim(), std::move(eval), std::move(jac), std::move(norm)};
}

inline ScoreOracle gaussian_score(const Schedule& schedule, const GaussianTarget& target) {
  return {"gaussian-score", target.dim(), [schedule, target](double t, std::span<const double> x, std::span<double> out) {
            const auto v = schedule.eval(t);
            detail::apply_diagonal(target, x, out,
                                   [&](double l) { return -1.0 / (v.alpha * v.alpha + v.beta * v.beta * l); });
          }};
}

/// Time-independent drift (1/2) U diag(log lambda) U^T x of the matrix-valued
/// schedule that interpolates log-covariances linearly.
inline DriftOracle matrix_schedule_drift(const GaussianTarget& target) {
  auto factor = [](double l) { return 0.5 * std::log(l); };
  auto eval = [target, factor](double, std::span<const double> x, std::span<double> out) {
    detail::apply_diagonal(target, x, out, factor);
  };
  JacobianFn jac;
  if (target.basis() != BasisKind::Sine) {
    jac = [target, factor](double, std::span<const double>) { return detail::diagonal_matrix(target, factor); };
  }
  const double lip = std::max(std::abs(factor(target.min_eigenvalue())), std::abs(factor(target.max_eigenvalue())));
  auto norm = [lip](double, std::span<const double>) { return lip; };
  return {"matrix-schedule", "matrix", target.dim(), std::move(eval), std::move(jac), std::move(norm)};
}

/// Drift of the 1D optimal-transport path between N(0, c0) and N(0, m).
inline DriftOracle ot_gaussian_drift(double m, double c0 = 1.0) {
  if (!(m > 0.0) || !(c0 > 0.0)) throw ParameterError("ot_gaussian_drift: variances must be positive");
  const double ratio = std::sqrt(m / c0);
  auto coef = [ratio](double t) { return (ratio - 1.0) / (1.0 - t + t * ratio); };
  auto eval = [coef](double t, std::span<const double> x, std::span<double> out) { out[0] = coef(t) * x[0]; };
  auto jac = [coef](double t, std::span<const double>) { return Eigen::MatrixXd::Constant(1, 1, coef(t)); };
  auto norm = [coef](double t, std::span<const double>) { return std::abs(coef(t)); };
  return {"ot-gaussian", "ot", 1, std::move(eval), std::move(jac), std::move(norm)};
}

/// alpha = 1 - t with beta chosen so the marginals of alpha z + beta x1 follow
/// the optimal-transport path from N(0, 1) to N(0, m).
inline Schedule ot_path_schedule(double m) {
  if (!(m > 0.0)) throw ParameterError("ot_path_schedule: variance must be positive");
  const double c = 2.0 / std::sqrt(m);
  return Schedule::custom("ot-path(M=" + std::to_string(m) + ")", [c](double t) {
    const double b2 = t * t + c * t * (1.0 - t);
    const double beta = std::sqrt(b2);
    const double db2 = 2.0 * t + c * (1.0 - 2.0 * t);
    const double beta_dot = beta > 0.0 ? db2 / (2.0 * beta) : std::numeric_limits<double>::infinity();
    return ScheduleValue{1.0 - t, beta, -1.0, beta_dot};
  });
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

namespace detail {

struct MixtureTerms {
  std::vector<double> weights;        // responsibilities
  std::vector<Eigen::VectorXd> v;     // conditional drifts per component
  std::vector<Eigen::VectorXd> g;     // -Cbar^{-1}(x - beta m_j)
  std::vector<Eigen::MatrixXd> a_cinv;  // A_j Cbar_j^{-1}
};

inline MixtureTerms mixture_terms(const GeneralGmmTarget& target, const ScheduleValue& s, std::span<const double> x,
                                  bool need_jacobian) {
  const auto n = target.components();
  const auto d = target.dim();
  MixtureTerms out;
  out.weights.resize(n);
  out.v.resize(n);
  out.g.resize(n);
  if (need_jacobian) out.a_cinv.resize(n);
  std::vector<double> logw(n);
  const auto xv = as_vector(x);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::MatrixXd cbar = s.beta * s.beta * target.cov(j) + s.alpha * s.alpha * target.noise_cov();
    Eigen::LLT<Eigen::MatrixXd> llt(cbar);
    if (llt.info() != Eigen::Success) throw LinalgError("general_gmm_drift: component covariance solve failed");
    const Eigen::VectorXd diff = xv - s.beta * target.mean(j);
    const Eigen::VectorXd sol = llt.solve(diff);
    double logdet = 0.0;
    const auto& lmat = llt.matrixLLT();
    for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(lmat(i, i));
    logw[j] = (target.weight(j) > 0.0 ? std::log(target.weight(j)) : -std::numeric_limits<double>::infinity()) -
              0.5 * logdet - 0.5 * diff.dot(sol);
    const Eigen::MatrixXd a = s.beta * s.beta_dot * target.cov(j) + s.alpha * s.alpha_dot * target.noise_cov();
    out.v[j] = s.beta_dot * target.mean(j) + a * sol;
    out.g[j] = -sol;
    if (need_jacobian) out.a_cinv[j] = llt.solve(a.transpose()).transpose();
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out.weights[j] = std::exp(logw[j] - mx);
    total += out.weights[j];
  }
  for (auto& w : out.weights) w /= total;
  return out;
}

}  // namespace detail

/// Drift of a Gaussian mixture target with noise covariance C0 under any
/// scalar schedule. Responsibilities use a max-shifted softmax.
inline DriftOracle general_gmm_drift(const Schedule& schedule, const GeneralGmmTarget& target) {
  auto eval = [schedule, target](double t, std::span<const double> x, std::span<double> out) {
    const auto s = schedule.eval(t);
    const auto terms = detail::mixture_terms(target, s, x, false);
    auto o = as_vector(out);
    o.setZero();
    for (std::size_t j = 0; j < terms.weights.size(); ++j) o += terms.weights[j] * terms.v[j];
  };
  auto jac = [schedule, target](double t, std::span<const double> x) {
    const auto s = schedule.eval(t);
    const auto terms = detail::mixture_terms(target, s, x, true);
    const auto d = target.dim();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d), gbar = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < terms.weights.size(); ++j) {
      b += terms.weights[j] * terms.v[j];
      gbar += terms.weights[j] * terms.g[j];
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t j = 0; j < terms.weights.size(); ++j) {
      out += terms.weights[j] * terms.a_cinv[j];
      out += terms.weights[j] * (terms.v[j] - b) * (terms.g[j] - gbar).transpose();
    }
    return out;
  };
  return {"general-gmm", schedule.name(), target.dim(), std::move(eval), std::move(jac)};
}

inline ScoreOracle general_gmm_score(const Schedule& schedule, const GeneralGmmTarget& target) {
  return {"general-gmm-score", target.dim(),
          [schedule, target](double t, std::span<const double> x, std::span<double> out) {
            const auto s = schedule.eval(t);
            const auto terms = detail::mixture_terms(target, s, x, false);
            auto o = as_vector(out);
            o.setZero();
            for (std::size_t j = 0; j < terms.weights.size(); ++j) o += terms.weights[j] * terms.g[j];
          }};
}

/// Closed-form drift beta_dot r tanh(h + beta <r, x>) of the symmetric bimodal
/// mixture. Valid only for schedules with alpha^2 + beta^2 = 1.
inline DriftOracle bimodal_drift(const Schedule& schedule, const BimodalGmmTarget& target) {
  if (!schedule.is_trig())
    throw ContractError("bimodal_drift: closed form requires alpha^2 + beta^2 = 1, got " + schedule.name());
  auto eval = [schedule, target](double t, std::span<const double> x, std::span<double> out) {
    const auto s = schedule.eval(t);
    const double proj = target.r().dot(as_vector(x));
    as_vector(out) = (s.beta_dot * std::tanh(target.h() + s.beta * proj)) * target.r();
  };
  auto jac = [schedule, target](double t, std::span<const double> x) {
    const auto s = schedule.eval(t);
    const double sh = num::sech(target.h() + s.beta * target.r().dot(as_vector(x)));
    return Eigen::MatrixXd(s.beta_dot * s.beta * sh * sh * target.r() * target.r().transpose());
  };
  auto norm = [schedule, target, r2 = target.r().squaredNorm()](double t, std::span<const double> x) {
    const auto s = schedule.eval(t);
    const double sh = num::sech(target.h() + s.beta * target.r().dot(as_vector(x)));
    return std::abs(s.beta_dot * s.beta) * sh * sh * r2;
  };
  return {"bimodal", schedule.name(), target.dim(), std::move(eval), std::move(jac), std::move(norm)};
}

// ---------------------------------------------------------------------------
// Schedule transfer and drift/score conversions

/// Drift under `schedule` from a drift computed under the linear schedule
/// alpha = 1 - t, beta = t. With y = x / (alpha + beta) and
/// t' = beta / (alpha + beta), the linear-schedule drift gives both
/// conditional means E[x1 | .] = y + (1 - t') b'(y) and E[z | .] = y - t' b'(y),
/// and b = beta_dot E[x1 | .] + alpha_dot E[z | .]. No division by alpha or
/// beta alone is needed.
inline DriftOracle transfer_drift(const DriftOracle& reference, const Schedule& schedule) {
  if (reference.schedule_name() != "linear")
    throw ContractError("transfer_drift: reference drift must use the linear schedule, got " +
                        reference.schedule_name());
  auto eval = [reference, schedule](double t, std::span<const double> x, std::span<double> out) {
    const auto s = schedule.eval(t);
    const double sum = s.alpha + s.beta;
    if (!(sum > 0.0)) throw DomainError("transfer_drift: alpha + beta vanishes");
    const double tr = s.beta / sum;
    Eigen::VectorXd y = as_vector(x) / sum;
    const Eigen::VectorXd br = reference.eval(tr, y);
    as_vector(out) = s.beta_dot * (y + (1.0 - tr) * br) + s.alpha_dot * (y - tr * br);
  };
  JacobianFn jac;
  if (reference.has_jacobian()) {
    jac = [reference, schedule](double t, std::span<const double> x) {
      const auto s = schedule.eval(t);
      const double sum = s.alpha + s.beta;
      if (!(sum > 0.0)) throw DomainError("transfer_drift: alpha + beta vanishes");
      const double tr = s.beta / sum;
      const Eigen::VectorXd y = as_vector(x) / sum;
      const auto d = static_cast<Eigen::Index>(x.size());
      const Eigen::MatrixXd jr = reference.jacobian(tr, {y.data(), x.size()});
      return Eigen::MatrixXd(((s.beta_dot * (1.0 - tr) - s.alpha_dot * tr) * jr +
                              (s.beta_dot + s.alpha_dot) * Eigen::MatrixXd::Identity(d, d)) /
                             sum);
    };
  }
  return {"transfer(" + reference.name() + ")", schedule.name(), reference.dim(), std::move(eval), std::move(jac)};
}

/// epsilon_t = alpha^2 (beta_dot / beta - alpha_dot / alpha), the diffusion
/// level that minimizes the path-space KL.
inline std::function<double(double)> optimal_epsilon(const Schedule& schedule) {
  return [schedule](double t) {
    const auto s = schedule.eval(t);
    if (s.alpha == 0.0) return 0.0;
    if (s.beta == 0.0) return std::numeric_limits<double>::infinity();
    return s.alpha * s.alpha * s.beta_dot / s.beta - s.alpha * s.alpha_dot;
  };
}

namespace detail {

struct AffineCoefficients {
  double x_coef;      // beta_dot / beta
  double score_coef;  // alpha^2 (beta_dot / beta - alpha_dot / alpha)
};

inline AffineCoefficients affine_coefficients(const Schedule& schedule, double t) {
  const auto s = schedule.eval(t);
  if (!(s.alpha > 0.0 && s.beta > 0.0)) {
    std::ostringstream os;
    os << "drift/score conversion is singular at t=" << t;
    throw DomainError(os.str());
  }
  return {s.beta_dot / s.beta, s.alpha * s.alpha * s.beta_dot / s.beta - s.alpha * s.alpha_dot};
}

}  // namespace detail

inline ScoreOracle score_from_drift(const DriftOracle& drift, const Schedule& schedule) {
  return {"score(" + drift.name() + ")", drift.dim(),
          [drift, schedule](double t, std::span<const double> x, std::span<double> out) {
            const auto c = detail::affine_coefficients(schedule, t);
            drift.eval(t, x, out);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - c.x_coef * x[i]) / c.score_coef;
          }};
}

inline DriftOracle drift_from_score(const ScoreOracle& score, const Schedule& schedule) {
  return {"drift(" + score.name() + ")", schedule.name(), score.dim(),
          [score, schedule](double t, std::span<const double> x, std::span<double> out) {
            const auto c = detail::affine_coefficients(schedule, t);
            score.eval(t, x, out);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.x_coef * x[i] + c.score_coef * out[i];
          }};
}

}  // namespace ilab
