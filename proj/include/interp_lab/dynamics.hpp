#pragma once

// Fixed-step integrators for the generative ODE dX = b_t(X) dt and the SDE
// dX = (b_t + eps_t s_t) dt + sqrt(2 eps_t) dW_t.

#include "interp_lab/core.hpp"
#include "interp_lab/drift.hpp"
#include "interp_lab/parallel.hpp"
#include "interp_lab/rng.hpp"
#include "interp_lab/targets.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ilab {

enum class Method { Euler, Heun, RK4, EulerMaruyama };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Euler: return "euler";
    case Method::Heun: return "heun";
    case Method::RK4: return "rk4";
    case Method::EulerMaruyama: return "euler-maruyama";
  }
  return "unknown";
}

struct IntegratorConfig {
  Method method = Method::RK4;
  int steps = 20;
  double t_min = 1e-3;
  double t_max = 1.0 - 1e-3;
  bool store_trajectory = false;
  double divergence_threshold = 1e12;

  void validate() const {
    if (steps < 1) throw ParameterError("IntegratorConfig: steps must be >= 1");
    if (!(t_min >= 0.0 && t_min < t_max && t_max <= 1.0))
      throw ParameterError("IntegratorConfig: need 0 <= t_min < t_max <= 1");
  }

  double dt() const { return (t_max - t_min) / steps; }
  double time(int k) const { return k == steps ? t_max : t_min + k * dt(); }
};

/// States after each step; frame 0 is the initial batch.
struct Trajectory {
  std::vector<int> step;
  std::vector<double> t;
  std::vector<RowMatrix> frames;
};

namespace detail {

class DivergenceTracker {
 public:
  void report(int step) {
    int cur = first_.load();
    while (step < cur && !first_.compare_exchange_weak(cur, step)) {
    }
  }
  int first() const { return first_.load(); }
  bool any() const { return first_.load() != std::numeric_limits<int>::max(); }

 private:
  std::atomic<int> first_{std::numeric_limits<int>::max()};
};

inline bool diverged(std::span<const double> x, double threshold) {
  double sq = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) return true;
    sq += v * v;
  }
  return !(std::sqrt(sq) <= threshold);
}

inline void throw_divergence(const DivergenceTracker& tracker, const std::string& what) {
  std::ostringstream os;
  os << what << ": state diverged at step " << tracker.first();
  throw DivergenceError(os.str(), tracker.first());
}

inline Trajectory start_trajectory(const SampleBatch& initial, const IntegratorConfig& cfg) {
  Trajectory tr;
  tr.step.resize(static_cast<std::size_t>(cfg.steps) + 1);
  tr.t.resize(tr.step.size());
  tr.frames.assign(tr.step.size(), RowMatrix(initial.size(), initial.dim()));
  for (int k = 0; k <= cfg.steps; ++k) {
    tr.step[static_cast<std::size_t>(k)] = k;
    tr.t[static_cast<std::size_t>(k)] = cfg.time(k);
  }
  tr.frames[0] = initial.states;
  return tr;
}

}  // namespace detail

/// Integrates every row of `initial` from t_min to t_max on a uniform grid.
/// Rows are independent, so rows are distributed across worker threads.
inline SampleBatch integrate_ode(const DriftOracle& drift, const SampleBatch& initial, const IntegratorConfig& cfg,
                                 Trajectory* trajectory = nullptr) {
  cfg.validate();
  if (cfg.method == Method::EulerMaruyama) throw ParameterError("integrate_ode: Euler-Maruyama needs integrate_sde");
  if (initial.dim() != drift.dim()) throw ShapeError("integrate_ode: batch dimension does not match drift");
  SampleBatch out = initial;
  out.t = cfg.t_max;
  const bool store = cfg.store_trajectory && trajectory != nullptr;
  if (store) *trajectory = detail::start_trajectory(initial, cfg);
  const auto d = static_cast<std::size_t>(initial.dim());
  const double h = cfg.dt();
  detail::DivergenceTracker tracker;

  parallel_for(0, static_cast<std::size_t>(initial.size()), [&](std::size_t i) {
    auto x = out.row(static_cast<Eigen::Index>(i));
    std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
    for (int step = 0; step < cfg.steps; ++step) {
      const double t = cfg.time(step);
      switch (cfg.method) {
        case Method::Euler:
          drift.eval(t, x, k1);
          for (std::size_t c = 0; c < d; ++c) x[c] = x[c] + h * k1[c];
          break;
        case Method::Heun:
          drift.eval(t, x, k1);
          for (std::size_t c = 0; c < d; ++c) tmp[c] = x[c] + h * k1[c];
          drift.eval(t + h, tmp, k2);
          for (std::size_t c = 0; c < d; ++c) x[c] = x[c] + 0.5 * h * (k1[c] + k2[c]);
          break;
        default: {
          const double th = t + 0.5 * h;
          drift.eval(t, x, k1);
          for (std::size_t c = 0; c < d; ++c) tmp[c] = x[c] + 0.5 * h * k1[c];
          drift.eval(th, tmp, k2);
          for (std::size_t c = 0; c < d; ++c) tmp[c] = x[c] + 0.5 * h * k2[c];
          drift.eval(th, tmp, k3);
          for (std::size_t c = 0; c < d; ++c) tmp[c] = x[c] + h * k3[c];
          drift.eval(cfg.time(step + 1), tmp, k4);
          for (std::size_t c = 0; c < d; ++c) x[c] = x[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
          break;
        }
      }
      if (detail::diverged(x, cfg.divergence_threshold)) {
        tracker.report(step + 1);
        return;
      }
      if (store)
        std::copy(x.begin(), x.end(),
                  trajectory->frames[static_cast<std::size_t>(step) + 1].data() + i * d);
    }
  });
  if (tracker.any()) detail::throw_divergence(tracker, "integrate_ode");
  return out;
}

/// Euler-Maruyama. Row i draws its Brownian increments from the stream
/// (seed, Brownian, i), so results do not depend on the thread count.
/// eps is evaluated at the left end of each step; when it is zero the score
/// is not evaluated and the update reduces to the Euler ODE step.
inline SampleBatch integrate_sde(const DriftOracle& drift, const ScoreOracle& score,
                                 const std::function<double(double)>& epsilon, const SampleBatch& initial,
                                 const IntegratorConfig& cfg, std::uint64_t seed, Trajectory* trajectory = nullptr) {
  cfg.validate();
  if (cfg.method != Method::EulerMaruyama) throw ParameterError("integrate_sde: method must be Euler-Maruyama");
  if (initial.dim() != drift.dim() || score.dim() != drift.dim())
    throw ShapeError("integrate_sde: dimension mismatch between batch, drift and score");
  const double h = cfg.dt();
  std::vector<double> eps(static_cast<std::size_t>(cfg.steps));
  for (int k = 0; k < cfg.steps; ++k) {
    const double e = epsilon(cfg.time(k));
    if (!(e >= 0.0) || !std::isfinite(e)) {
      std::ostringstream os;
      os << "integrate_sde: epsilon must be finite and nonnegative, got " << e << " at t=" << cfg.time(k);
      throw ParameterError(os.str());
    }
    eps[static_cast<std::size_t>(k)] = e;
  }
  SampleBatch out = initial;
  out.t = cfg.t_max;
  const bool store = cfg.store_trajectory && trajectory != nullptr;
  if (store) *trajectory = detail::start_trajectory(initial, cfg);
  const auto d = static_cast<std::size_t>(initial.dim());
  detail::DivergenceTracker tracker;

  parallel_for(0, static_cast<std::size_t>(initial.size()), [&](std::size_t i) {
    Rng rng(seed, Stream::Brownian, i);
    auto x = out.row(static_cast<Eigen::Index>(i));
    std::vector<double> b(d), s(d);
    for (int step = 0; step < cfg.steps; ++step) {
      const double t = cfg.time(step);
      const double e = eps[static_cast<std::size_t>(step)];
      drift.eval(t, x, b);
      if (e > 0.0) {
        score.eval(t, x, s);
        const double noise = std::sqrt(2.0 * e * h);
        for (std::size_t c = 0; c < d; ++c) x[c] = x[c] + h * (b[c] + e * s[c]) + noise * rng.normal();
      } else {
        for (std::size_t c = 0; c < d; ++c) x[c] = x[c] + h * b[c];
      }
      if (detail::diverged(x, cfg.divergence_threshold)) {
        tracker.report(step + 1);
        return;
      }
      if (store)
        std::copy(x.begin(), x.end(),
                  trajectory->frames[static_cast<std::size_t>(step) + 1].data() + i * d);
    }
  });
  if (tracker.any()) detail::throw_divergence(tracker, "integrate_sde");
  return out;
}

/// Starting batch alpha_{t_min} z at t = t_min. The beta_{t_min} x1 part of
/// the interpolant is dropped.
inline SampleBatch initial_noise(const Schedule& schedule, const Target& target, double t_min, Eigen::Index n,
                                 std::uint64_t seed) {
  auto z = sample_noise(target, n, seed);
  z.states *= schedule.eval(t_min).alpha;
  z.t = t_min;
  return z;
}

}  // namespace ilab
