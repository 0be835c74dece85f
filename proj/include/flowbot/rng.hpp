#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace flowbot {

// Counter-style PRNG used throughout so that every sampled quantity is
// bit-identical across runs and platforms (libstdc++ distributions make no
// such promise), and so that per-point streams can be seeded cheaply inside
// hot loops.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is far below anything our statistical tests can see.
    return next() % n;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      const double v = 2.0 * uniform01() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

 private:
  std::uint64_t state_;
};

/// Order-sensitive seed combiner for derived streams (per-part, per-replan,
/// per-point, ...).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a fold of a string into a running seed; used to derive trial seeds
/// from (base_seed, scene name, parameter signature, trial index).
inline std::uint64_t mix_seed(std::uint64_t a, std::string_view s) {
  std::uint64_t h = a ^ 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Uniformly distributed unit vector orthogonal to `axis` (itself nonzero).
inline Eigen::Vector3d random_perpendicular(SplitMix64& rng, const Eigen::Vector3d& axis) {
  const Eigen::Vector3d n = axis.normalized();
  // Anchor the basis on the smallest component so it is well conditioned.
  Eigen::Vector3d helper = Eigen::Vector3d::UnitX();
  if (std::abs(n.y()) < std::abs(n.x())) helper = Eigen::Vector3d::UnitY();
  if (std::abs(n.z()) < std::abs(n.x()) && std::abs(n.z()) < std::abs(n.y()))
    helper = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d e1 = n.cross(helper).normalized();
  const Eigen::Vector3d e2 = n.cross(e1);
  const double theta = 2.0 * M_PI * rng.uniform01();
  return std::cos(theta) * e1 + std::sin(theta) * e2;
}

}  // namespace flowbot
