#ifndef GAPSPHERE_RANDOM_HPP
#define GAPSPHERE_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "gapsphere/core.hpp"

namespace gapsphere {

namespace detail {
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Deterministic random stream identified by (master seed, stream index).
///
/// Two streams built from the same pair produce the same draw sequence
/// within one build. Streams are not shared between threads; parallel code
/// derives one substream per task.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::uint64_t index = 0)
      : seed_(seed), index_(index),
        engine_(detail::splitmix64(seed ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t index() const { return index_; }

  /// Child stream; depends only on (seed, index, child) and not on how far
  /// this stream has advanced.
  RngStream substream(std::uint64_t child) const {
    return RngStream(seed_, detail::splitmix64(index_ * 0x9e3779b97f4a7c15ULL + child + 1));
  }

  std::mt19937_64& engine() { return engine_; }

  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

  /// Uniform on (0, 1]; safe to feed to log().
  double uniformPositive() { return 1.0 - uniform(); }

  double normal() { return normal_(engine_); }

  /// Rotationally symmetric complex Gaussian with E|z|^2 = variance.
  template <typename Real = double>
  Complex<Real> complexNormal(Real variance = Real(1)) {
    const Real s = std::sqrt(variance / Real(2));
    const Real re = Real(normal());
    const Real im = Real(normal());
    return {s * re, s * im};
  }

  /// Uniform phase e^{i theta}.
  template <typename Real = double>
  Complex<Real> phase() {
    const Real theta = Real(2) * std::numbers::pi_v<Real> * Real(uniform());
    return std::polar(Real(1), theta);
  }

  /// Exponential with the given mean.
  double exponential(double mean) { return -mean * std::log(uniformPositive()); }

  Index index(Index n) {
    return static_cast<Index>(std::uniform_int_distribution<std::int64_t>(0, n - 1)(engine_));
  }

private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// d-vector of i.i.d. standard complex Gaussians (E|z|^2 = 1).
template <typename Real = double>
VectorX<Real> complexGaussianVector(Index d, RngStream& rng) {
  VectorX<Real> v(d);
  for (Index i = 0; i < d; ++i) v(i) = rng.complexNormal<Real>();
  return v;
}

/// rows x cols matrix of i.i.d. standard complex Gaussians, filled column-major.
template <typename Real = double>
MatrixX<Real> complexGaussianMatrix(Index rows, Index cols, RngStream& rng) {
  MatrixX<Real> m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.complexNormal<Real>();
  return m;
}

}  // namespace gapsphere

#endif  // GAPSPHERE_RANDOM_HPP
