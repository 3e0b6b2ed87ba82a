#pragma once

// Orthonormal 2D sine (DST-I) and unitary 2D Fourier transforms on square
// grids, backed by FFTW. Plans are created once per size and reused through
// the new-array execute interface, which FFTW guarantees is thread-safe.

#include "interp_lab/core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace ilab::fft {

namespace detail {

struct PlanCache {
  std::mutex mutex;
  std::map<int, fftw_plan> dst;
  std::map<int, fftw_plan> dft;

  ~PlanCache() {
    for (auto& [n, p] : dst) fftw_destroy_plan(p);
    for (auto& [n, p] : dft) fftw_destroy_plan(p);
  }
};

inline PlanCache& cache() {
  static PlanCache c;
  return c;
}

inline fftw_plan dst_plan(int n) {
  auto& c = cache();
  std::lock_guard<std::mutex> lock(c.mutex);
  auto it = c.dst.find(n);
  if (it != c.dst.end()) return it->second;
  std::vector<double> a(static_cast<std::size_t>(n) * n), b(a.size());
  fftw_plan p = fftw_plan_r2r_2d(n, n, a.data(), b.data(), FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw Error("fftw: failed to create DST-I plan");
  c.dst.emplace(n, p);
  return p;
}

inline fftw_plan dft_plan(int n) {
  auto& c = cache();
  std::lock_guard<std::mutex> lock(c.mutex);
  auto it = c.dft.find(n);
  if (it != c.dft.end()) return it->second;
  std::vector<fftw_complex> a(static_cast<std::size_t>(n) * n), b(a.size());
  fftw_plan p = fftw_plan_dft_2d(n, n, a.data(), b.data(), FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw Error("fftw: failed to create DFT plan");
  c.dft.emplace(n, p);
  return p;
}

}  // namespace detail

/// Orthonormal 2D DST-I of an n x n row-major array. Self-inverse.
inline void dst1_2d(std::span<const double> in, std::span<double> out, int n) {
  const std::size_t size = static_cast<std::size_t>(n) * n;
  if (n < 1 || in.size() != size || out.size() != size) throw ShapeError("dst1_2d: buffer size mismatch");
  // FFTW r2r does not modify the input for RODFT00 when out-of-place.
  std::vector<double> src(in.begin(), in.end());
  fftw_execute_r2r(detail::dst_plan(n), src.data(), out.data());
  const double scale = 1.0 / (2.0 * (n + 1));
  for (double& v : out) v *= scale;
}

/// Unitary 2D DFT of a real n x n row-major array.
inline std::vector<std::complex<double>> dft_2d(std::span<const double> in, int n) {
  const std::size_t size = static_cast<std::size_t>(n) * n;
  if (n < 1 || in.size() != size) throw ShapeError("dft_2d: buffer size mismatch");
  std::vector<std::complex<double>> src(size), dst(size);
  for (std::size_t i = 0; i < size; ++i) src[i] = in[i];
  fftw_execute_dft(detail::dft_plan(n), reinterpret_cast<fftw_complex*>(src.data()),
                   reinterpret_cast<fftw_complex*>(dst.data()));
  const double scale = 1.0 / n;
  for (auto& v : dst) v *= scale;
  return dst;
}

/// Interior of an N x N grid (boundary rows and columns dropped).
inline std::vector<double> interior(std::span<const double> field, int grid) {
  const int m = grid - 2;
  std::vector<double> out(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(i) * m + j] = field[static_cast<std::size_t>(i + 1) * grid + j + 1];
  return out;
}

/// Writes an (N-2) x (N-2) interior array into an N x N grid with zero boundary.
inline void embed_interior(std::span<const double> inner, std::span<double> field, int grid) {
  const int m = grid - 2;
  std::fill(field.begin(), field.end(), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) field[static_cast<std::size_t>(i + 1) * grid + j + 1] = inner[static_cast<std::size_t>(i) * m + j];
}

}  // namespace ilab::fft
