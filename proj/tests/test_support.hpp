#ifndef GAPSPHERE_TEST_SUPPORT_HPP
#define GAPSPHERE_TEST_SUPPORT_HPP

#include <cmath>
#include <vector>

#include "gapsphere/hilbert.hpp"

namespace gapsphere::testing {

/// Random full-rank density matrix: Haar eigenvectors, flat-Dirichlet eigenvalues.
inline DensityMatrix<double> randomDensity(Index d, RngStream& rng, RealVectorX<double>* weights = nullptr,
                                           MatrixX<double>* basis = nullptr) {
  RealVectorX<double> p(d);
  for (Index i = 0; i < d; ++i) p(i) = rng.exponential(1.0);
  p /= p.sum();
  const auto u = haarUnitary<double>(d, rng);
  if (weights) *weights = p;
  if (basis) *basis = u.matrix();
  return DensityMatrix<double>::fromSpectrum(p, u.matrix());
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe meanSe(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= double(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return {m, std::sqrt(s / double(x.size() - 1) / double(x.size()))};
}

/// z-score of a sample mean against an exact value.
inline double zAgainst(const std::vector<double>& x, double exact) {
  const MeanSe ms = meanSe(x);
  return (ms.mean - exact) / ms.se;
}

/// Two-sample z-score of the difference of means.
inline double zBetween(const std::vector<double>& a, const std::vector<double>& b) {
  const MeanSe x = meanSe(a), y = meanSe(b);
  return (x.mean - y.mean) / std::hypot(x.se, y.se);
}

}  // namespace gapsphere::testing

#endif  // GAPSPHERE_TEST_SUPPORT_HPP
