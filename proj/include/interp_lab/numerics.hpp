#pragma once

#include "interp_lab/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace ilab::num {

/// Pairwise (tree) summation. The result depends only on the order of the
/// input, never on how the input was produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanStat {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double std_error = 0.0;
};

inline MeanStat mean_stat(std::span<const double> v) {
  MeanStat out;
  const auto n = static_cast<double>(v.size());
  if (v.empty()) return out;
  out.mean = pairwise_sum(v) / n;
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
  out.variance = pairwise_sum(sq) / (n - 1.0);
  out.std_error = std::sqrt(out.variance / n);
  return out;
}

/// Slopes of the shape-preserving piecewise cubic through (x, y), using the
/// weighted harmonic mean of adjacent secants and one-sided three-point
/// endpoint formulas.
inline std::vector<double> pchip_slopes(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
    return d;
  }
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  auto edge = [](double h0, double h1, double m0, double m1) {
    double s = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (s * m0 <= 0.0) return 0.0;
    if (m0 * m1 <= 0.0 && std::abs(s) > std::abs(3.0 * m0)) return 3.0 * m0;
    return s;
  };
  d[0] = edge(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

/// Fritsch-Carlson limiter: rescales slopes so every Hermite segment of
/// increasing data stays monotone.
inline void limit_monotone(std::span<const double> x, std::span<const double> y, std::span<double> d) {
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    if (delta == 0.0) {
      d[i] = d[i + 1] = 0.0;
      continue;
    }
    const double a = d[i] / delta;
    const double b = d[i + 1] / delta;
    if (a < 0.0) d[i] = 0.0;
    if (b < 0.0) d[i + 1] = 0.0;
    const double r2 = a * a + b * b;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      d[i] = tau * a * delta;
      d[i + 1] = tau * b * delta;
    }
  }
}

struct HermiteValue {
  double value;
  double derivative;
};

/// Cubic Hermite evaluation on sorted knots; x is clamped to the knot range.
inline HermiteValue hermite_eval(std::span<const double> x, std::span<const double> y, std::span<const double> d,
                                 double at) {
  at = std::clamp(at, x.front(), x.back());
  auto it = std::upper_bound(x.begin(), x.end(), at);
  std::size_t i = (it == x.begin()) ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  if (i + 1 >= x.size()) i = x.size() - 2;
  const double h = x[i + 1] - x[i];
  const double s = (at - x[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  const double value = h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1];
  const double dh00 = (6 * s2 - 6 * s) / h;
  const double dh10 = 3 * s2 - 4 * s + 1;
  const double dh01 = (-6 * s2 + 6 * s) / h;
  const double dh11 = 3 * s2 - 2 * s;
  const double deriv = dh00 * y[i] + dh10 * d[i] + dh01 * y[i + 1] + dh11 * d[i + 1];
  return {value, deriv};
}

/// Root of a monotone function on [lo, hi] by bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
  double flo = f(lo);
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Composite Simpson weights for an odd number of equispaced nodes.
inline std::vector<double> simpson_weights(std::size_t nodes, double h) {
  if (nodes < 3 || nodes % 2 == 0) throw ParameterError("simpson_weights: need an odd node count >= 3");
  std::vector<double> w(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    w[i] = (i == 0 || i + 1 == nodes) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    w[i] *= h / 3.0;
  }
  return w;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = b;
  return out;
}

inline double sech(double x) {
  const double ax = std::abs(x);
  if (ax > 350.0) return 0.0;
  const double e = std::exp(-ax);
  return 2.0 * e / (1.0 + e * e);
}

}  // namespace ilab::num
