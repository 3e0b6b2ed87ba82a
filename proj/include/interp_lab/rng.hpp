#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ilab {

// Purpose tags keep independent draws (noise z, target x1, Brownian
// increments, ...) on disjoint streams even when they share a seed and index.
enum class Stream : std::uint64_t {
  Target = 1,
  Noise = 2,
  Brownian = 3,
  Probe = 4,
  Init = 5,
  Aux = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream (seed, tag, index). Every sample index gets its own engine,
/// so a batch is identical regardless of how indices are split across threads.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream tag, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ index);
}

class Rng {
 public:
  Rng(std::uint64_t seed, Stream tag, std::uint64_t index) : engine_(derive_seed(seed, tag, index)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ilab
