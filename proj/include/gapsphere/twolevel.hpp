#ifndef GAPSPHERE_TWOLEVEL_HPP
#define GAPSPHERE_TWOLEVEL_HPP

#include <cmath>
#include <string>
#include <vector>

#include "gapsphere/core.hpp"
#include "gapsphere/quadrature.hpp"

namespace gapsphere::twolevel {

/// Two-level system parameterized by delta = exp(beta (E2 - E1)).
/// The law of s = |<1|Psi^GAP>|^2 has density (alpha1 s + alpha2 (1 - s))^-3 on (0, 1).
template <typename Real = double>
struct TwoLevelSpec {
  Real delta = Real(1);
  Real alpha1 = Real(1);
  Real alpha2 = Real(1);

  static TwoLevelSpec fromDelta(Real delta) {
    require(delta > Real(0) && std::isfinite(double(delta)), "TwoLevelSpec: delta must be positive and finite");
    const Real inv = Real(1) / delta;
    return {delta, std::cbrt(inv * (inv + Real(1)) / Real(2)), std::cbrt(delta * (delta + Real(1)) / Real(2))};
  }

  static TwoLevelSpec fromEnergies(Real e1, Real e2, Real beta) { return fromDelta(std::exp(beta * (e2 - e1))); }

  /// Eigenvalue of rho_beta for level 1: delta / (1 + delta).
  Real p1() const { return delta / (Real(1) + delta); }
  Real p2() const { return Real(1) / (Real(1) + delta); }
};

/// Joint density of (|Z_1^GA|^2, |Z_2^GA|^2): (s1 + s2)/(p1 p2) exp(-s1/p1 - s2/p2).
template <typename Real = double>
Real jointGaModuliDensity(Real s1, Real s2, Real p1, Real p2) {
  if (!(p1 > Real(0) && p2 > Real(0))) throw DomainError("jointGaModuliDensity: weights must be positive");
  if (s1 < Real(0) || s2 < Real(0)) throw DomainError("jointGaModuliDensity: moduli must be nonnegative");
  return (s1 + s2) / (p1 * p2) * std::exp(-s1 / p1 - s2 / p2);
}

/// f continued to the closed interval [0, 1]; used for plotting.
template <typename Real = double>
Real fDensityClosed(Real s, const TwoLevelSpec<Real>& spec) {
  if (s < Real(0) || s > Real(1)) throw DomainError("fDensityClosed: s outside [0, 1]");
  const Real x = spec.alpha1 * s + spec.alpha2 * (Real(1) - s);
  return Real(1) / (x * x * x);
}

template <typename Real = double>
Real fDensity(Real s, const TwoLevelSpec<Real>& spec) {
  if (!(s > Real(0) && s < Real(1))) throw DomainError("fDensity: s outside (0, 1)");
  return fDensityClosed(s, spec);
}

/// Integral of f over [0, s], written so that it stays accurate as delta -> 1.
template <typename Real = double>
Real fCdf(Real s, const TwoLevelSpec<Real>& spec) {
  if (s <= Real(0)) return Real(0);
  if (s >= Real(1)) s = Real(1);
  const Real a2 = spec.alpha2;
  const Real x = a2 + (spec.alpha1 - a2) * s;
  return s * (x + a2) / (Real(2) * a2 * a2 * x * x);
}

/// E s under f, by Gauss-Legendre quadrature; equals p1().
template <typename Real = double>
Real fMean(const TwoLevelSpec<Real>& spec) {
  return integrate<Real>([&](Real s) { return s * fDensityClosed(s, spec); }, Real(0), Real(1), 8, 32);
}

template <typename Real = double>
struct Figure1Row {
  Real delta;
  Real s;
  Real f;
};

inline std::vector<double> figure1Deltas() { return {1.0 / 3.0, 0.5, 1.0, 2.0, 3.0}; }

/// f on an evenly spaced grid of [0, 1] (endpoints by continuity) for each delta.
template <typename Real = double>
std::vector<Figure1Row<Real>> figure1Data(const std::vector<Real>& deltas, Index gridPoints) {
  require(gridPoints >= 2, "figure1Data: grid needs at least 2 points");
  std::vector<Figure1Row<Real>> rows;
  rows.reserve(deltas.size() * std::size_t(gridPoints));
  for (Real d : deltas) {
    const auto spec = TwoLevelSpec<Real>::fromDelta(d);
    for (Index i = 0; i < gridPoints; ++i) {
      const Real s = Real(i) / Real(gridPoints - 1);
      rows.push_back({d, s, fDensityClosed(s, spec)});
    }
  }
  return rows;
}

}  // namespace gapsphere::twolevel

#endif  // GAPSPHERE_TWOLEVEL_HPP
