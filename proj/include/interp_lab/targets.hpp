#pragma once

// Target distributions (Gaussian by eigen-spectrum, bimodal and general
// Gaussian mixtures, Gaussian random fields on a Dirichlet grid) and the
// samplers for targets, noise and the interpolant itself.

#include "interp_lab/core.hpp"
#include "interp_lab/parallel.hpp"
#include "interp_lab/rng.hpp"
#include "interp_lab/schedule.hpp"
#include "interp_lab/sine_transform.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

namespace ilab {

enum class BasisKind { Identity, Orthogonal, Sine };

/// N(0, U diag(lambda) U^T) on R^d. The sine basis describes fields on an
/// N x N grid with zero boundary: d = N^2, and the (N-2)^2 interior
/// coefficients of the orthonormal DST-I carry the eigenvalues.
class GaussianTarget {
 public:
  static GaussianTarget diagonal(std::vector<double> eigenvalues) {
    GaussianTarget g;
    g.basis_ = BasisKind::Identity;
    g.eig_ = std::move(eigenvalues);
    g.dim_ = static_cast<int>(g.eig_.size());
    g.validate();
    return g;
  }

  static GaussianTarget orthogonal(std::vector<double> eigenvalues, Eigen::MatrixXd u) {
    GaussianTarget g;
    g.basis_ = BasisKind::Orthogonal;
    g.eig_ = std::move(eigenvalues);
    g.dim_ = static_cast<int>(g.eig_.size());
    if (u.rows() != g.dim_ || u.cols() != g.dim_) throw ShapeError("GaussianTarget: basis has wrong shape");
    const double defect = (u.transpose() * u - Eigen::MatrixXd::Identity(g.dim_, g.dim_)).cwiseAbs().maxCoeff();
    if (defect > 1e-10) throw ParameterError("GaussianTarget: basis is not orthogonal");
    g.u_ = std::move(u);
    g.validate();
    return g;
  }

  /// Interior eigenvalues in row-major (j, k) order, j, k = 1..N-2.
  static GaussianTarget sine_grid(int grid, std::vector<double> eigenvalues) {
    if (grid < 4) throw ParameterError("GaussianTarget: sine grid needs N >= 4");
    const std::size_t m = static_cast<std::size_t>(grid - 2);
    if (eigenvalues.size() != m * m) throw ShapeError("GaussianTarget: sine grid eigenvalue count must be (N-2)^2");
    GaussianTarget g;
    g.basis_ = BasisKind::Sine;
    g.grid_ = grid;
    g.eig_ = std::move(eigenvalues);
    g.dim_ = grid * grid;
    g.validate();
    return g;
  }

  int dim() const { return dim_; }
  int grid() const { return grid_; }
  BasisKind basis() const { return basis_; }
  std::span<const double> eigenvalues() const { return eig_; }
  const Eigen::MatrixXd& basis_matrix() const { return u_; }

  double min_eigenvalue() const { return *std::min_element(eig_.begin(), eig_.end()); }
  double max_eigenvalue() const { return *std::max_element(eig_.begin(), eig_.end()); }

  std::size_t coefficient_count() const { return eig_.size(); }

  /// Coordinates of x in the eigenbasis.
  void to_basis(std::span<const double> x, std::span<double> c) const {
    switch (basis_) {
      case BasisKind::Identity:
        std::copy(x.begin(), x.end(), c.begin());
        break;
      case BasisKind::Orthogonal:
        as_vector(c) = u_.transpose() * as_vector(x);
        break;
      case BasisKind::Sine: {
        const auto inner = fft::interior(x, grid_);
        fft::dst1_2d(inner, c, grid_ - 2);
        break;
      }
    }
  }

  void from_basis(std::span<const double> c, std::span<double> x) const {
    switch (basis_) {
      case BasisKind::Identity:
        std::copy(c.begin(), c.end(), x.begin());
        break;
      case BasisKind::Orthogonal:
        as_vector(x) = u_ * as_vector(c);
        break;
      case BasisKind::Sine: {
        std::vector<double> inner(c.size());
        fft::dst1_2d(c, inner, grid_ - 2);
        fft::embed_interior(inner, x, grid_);
        break;
      }
    }
  }

 private:
  void validate() const {
    if (eig_.empty()) throw ParameterError("GaussianTarget: no eigenvalues");
    for (double l : eig_)
      if (!(l > 0.0) || !std::isfinite(l)) throw ParameterError("GaussianTarget: eigenvalues must be positive");
  }

  BasisKind basis_ = BasisKind::Identity;
  std::vector<double> eig_;
  Eigen::MatrixXd u_;
  int dim_ = 0;
  int grid_ = 0;
};

/// N(0, sigma2 (-Laplacian + tau^2)^{-s}) on [0,1]^2 with zero Dirichlet data,
/// sampled on an N x N grid including the boundary.
struct GrfSpec {
  int grid = 64;
  double s = 3.0;
  double tau = 1.0;
  double sigma2 = std::pow(4.0 * std::numbers::pi * std::numbers::pi + 1.0, 3.0);

  void validate() const {
    if (grid < 4) throw ParameterError("GrfSpec: grid must be >= 4");
    if (s < 0.0) throw ParameterError("GrfSpec: s must be >= 0");
    if (!(tau > 0.0)) throw ParameterError("GrfSpec: tau must be > 0");
    if (!(sigma2 > 0.0)) throw ParameterError("GrfSpec: sigma2 must be > 0");
  }

  double eigenvalue(int j, int k) const {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    return sigma2 * std::pow(pi2 * (j * j + k * k) + tau * tau, -s);
  }

  GaussianTarget target() const {
    validate();
    const int m = grid - 2;
    std::vector<double> eig(static_cast<std::size_t>(m) * m);
    for (int j = 1; j <= m; ++j)
      for (int k = 1; k <= m; ++k) eig[static_cast<std::size_t>(j - 1) * m + (k - 1)] = eigenvalue(j, k);
    return GaussianTarget::sine_grid(grid, std::move(eig));
  }
};

/// p N(r, I) + (1-p) N(-r, I).
class BimodalGmmTarget {
 public:
  BimodalGmmTarget(Eigen::VectorXd r, double p) : r_(std::move(r)), p_(p) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("BimodalGmmTarget: p must lie in (0, 1)");
    if (r_.size() < 1) throw ParameterError("BimodalGmmTarget: empty separation vector");
    h_ = 0.5 * std::log(p / (1.0 - p));
  }

  static BimodalGmmTarget one_d(double m, double p) { return {Eigen::VectorXd::Constant(1, m), p}; }

  /// r = (1, ..., 1), so |r| = sqrt(d).
  static BimodalGmmTarget ones(int d, double p) {
    if (d < 1) throw ParameterError("BimodalGmmTarget: d must be >= 1");
    return {Eigen::VectorXd::Ones(d), p};
  }

  int dim() const { return static_cast<int>(r_.size()); }
  const Eigen::VectorXd& r() const { return r_; }
  double p() const { return p_; }
  double h() const { return h_; }
  double r_norm() const { return r_.norm(); }

 private:
  Eigen::VectorXd r_;
  double p_;
  double h_;
};

/// sum_j p_j N(m_j, C_j) with noise endpoint N(0, C0).
class GeneralGmmTarget {
 public:
  GeneralGmmTarget(std::vector<double> weights, std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> covs,
                   Eigen::MatrixXd c0 = {})
      : w_(std::move(weights)), m_(std::move(means)), c_(std::move(covs)), c0_(std::move(c0)) {
    if (w_.empty() || w_.size() != m_.size() || w_.size() != c_.size())
      throw ParameterError("GeneralGmmTarget: weights, means and covariances must have matching nonzero counts");
    const auto d = m_.front().size();
    if (d < 1) throw ParameterError("GeneralGmmTarget: empty mean");
    if (c0_.size() == 0) c0_ = Eigen::MatrixXd::Identity(d, d);
    double total = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) {
      if (!(w_[j] >= 0.0)) throw ParameterError("GeneralGmmTarget: weights must be nonnegative");
      total += w_[j];
      if (m_[j].size() != d || c_[j].rows() != d || c_[j].cols() != d)
        throw ShapeError("GeneralGmmTarget: component shapes disagree");
      Eigen::LLT<Eigen::MatrixXd> llt(c_[j]);
      if (llt.info() != Eigen::Success || !c_[j].isApprox(c_[j].transpose()))
        throw ParameterError("GeneralGmmTarget: component covariance is not symmetric positive-definite");
      chol_.push_back(llt.matrixL());
    }
    if (std::abs(total - 1.0) > 1e-10) throw ParameterError("GeneralGmmTarget: weights must sum to 1");
    if (c0_.rows() != d || c0_.cols() != d) throw ShapeError("GeneralGmmTarget: noise covariance has wrong shape");
    Eigen::LLT<Eigen::MatrixXd> llt0(c0_);
    if (llt0.info() != Eigen::Success || !c0_.isApprox(c0_.transpose()))
      throw ParameterError("GeneralGmmTarget: noise covariance is not symmetric positive-definite");
    chol0_ = llt0.matrixL();
  }

  /// The bimodal mixture p N(r, I) + (1-p) N(-r, I) written as a general mixture.
  static GeneralGmmTarget from_bimodal(const BimodalGmmTarget& b) {
    const auto d = b.dim();
    return {{b.p(), 1.0 - b.p()},
            {b.r(), -b.r()},
            {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)}};
  }

  int dim() const { return static_cast<int>(m_.front().size()); }
  std::size_t components() const { return w_.size(); }
  double weight(std::size_t j) const { return w_[j]; }
  const Eigen::VectorXd& mean(std::size_t j) const { return m_[j]; }
  const Eigen::MatrixXd& cov(std::size_t j) const { return c_[j]; }
  const Eigen::MatrixXd& cov_factor(std::size_t j) const { return chol_[j]; }
  const Eigen::MatrixXd& noise_cov() const { return c0_; }
  const Eigen::MatrixXd& noise_factor() const { return chol0_; }

 private:
  std::vector<double> w_;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::MatrixXd> c_;
  Eigen::MatrixXd c0_;
  std::vector<Eigen::MatrixXd> chol_;
  Eigen::MatrixXd chol0_;
};

using Target = std::variant<GaussianTarget, BimodalGmmTarget, GeneralGmmTarget>;

inline int target_dim(const Target& t) {
  return std::visit([](const auto& x) { return x.dim(); }, t);
}

namespace detail {

inline void draw_target(const GaussianTarget& g, Rng& rng, std::span<double> out) {
  std::vector<double> c(g.coefficient_count());
  const auto eig = g.eigenvalues();
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = std::sqrt(eig[j]) * rng.normal();
  g.from_basis(c, out);
}

inline void draw_target(const BimodalGmmTarget& b, Rng& rng, std::span<double> out) {
  const double sign = rng.uniform() < b.p() ? 1.0 : -1.0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sign * b.r()[static_cast<Eigen::Index>(i)] + rng.normal();
}

inline void draw_target(const GeneralGmmTarget& g, Rng& rng, std::span<double> out) {
  const double u = rng.uniform();
  std::size_t j = 0;
  double acc = g.weight(0);
  while (u >= acc && j + 1 < g.components()) acc += g.weight(++j);
  Eigen::VectorXd xi(g.dim());
  for (auto& v : xi) v = rng.normal();
  as_vector(out) = g.mean(j) + g.cov_factor(j) * xi;
}

inline void draw_noise(const Target& target, Rng& rng, std::span<double> out) {
  if (const auto* g = std::get_if<GaussianTarget>(&target); g && g->basis() == BasisKind::Sine) {
    // White noise on interior grid points; the boundary stays pinned at zero.
    const int n = g->grid();
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 1; i + 1 < n; ++i)
      for (int j = 1; j + 1 < n; ++j) out[static_cast<std::size_t>(i) * n + j] = rng.normal();
    return;
  }
  if (const auto* g = std::get_if<GeneralGmmTarget>(&target)) {
    Eigen::VectorXd xi(g->dim());
    for (auto& v : xi) v = rng.normal();
    as_vector(out) = g->noise_factor() * xi;
    return;
  }
  rng.fill_normal(out);
}

}  // namespace detail

/// n i.i.d. target samples; row i depends only on (seed, i).
inline SampleBatch sample_target(const Target& target, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample_target: n must be >= 1");
  SampleBatch out(n, target_dim(target), 1.0, seed);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng rng(seed, Stream::Target, i);
    auto row = out.row(static_cast<Eigen::Index>(i));
    std::visit([&](const auto& t) { detail::draw_target(t, rng, row); }, target);
  });
  return out;
}

/// n draws of the noise endpoint z matched to the target (identity covariance,
/// the target's C0 for general mixtures, interior white noise on grids).
inline SampleBatch sample_noise(const Target& target, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample_noise: n must be >= 1");
  SampleBatch out(n, target_dim(target), 0.0, seed);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng rng(seed, Stream::Noise, i);
    detail::draw_noise(target, rng, out.row(static_cast<Eigen::Index>(i)));
  });
  return out;
}

/// alpha_t z + beta_t x1 with z and x1 independent.
inline SampleBatch sample_interpolant(const Schedule& schedule, const Target& target, double t, Eigen::Index n,
                                      std::uint64_t seed) {
  const auto v = schedule.eval(t);
  auto z = sample_noise(target, n, seed);
  if (v.beta == 0.0) {
    z.states *= v.alpha;
    z.t = t;
    return z;
  }
  const auto x1 = sample_target(target, n, seed);
  SampleBatch out(n, target_dim(target), t, seed);
  out.states = v.alpha * z.states + v.beta * x1.states;
  return out;
}

}  // namespace ilab
