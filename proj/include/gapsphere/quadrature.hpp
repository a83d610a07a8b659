#ifndef GAPSPHERE_QUADRATURE_HPP
#define GAPSPHERE_QUADRATURE_HPP

#include <cmath>

#include <Eigen/Eigenvalues>

#include "gapsphere/core.hpp"

namespace gapsphere {

template <typename Real = double>
struct QuadratureRule {
  RealVectorX<Real> nodes;
  RealVectorX<Real> weights;

  template <typename F>
  Real integrate(F&& f) const {
    Real s = Real(0);
    for (Index i = 0; i < nodes.size(); ++i) s += weights(i) * f(nodes(i));
    return s;
  }
};

/// n-point Gauss-Legendre rule on [a, b] (Golub-Welsch).
template <typename Real = double>
QuadratureRule<Real> gaussLegendre(Index n, Real a = Real(0), Real b = Real(1)) {
  require(n >= 1, "gaussLegendre: need at least one node");
  RealMatrixX<Real> jacobi = RealMatrixX<Real>::Zero(n, n);
  for (Index i = 1; i < n; ++i) {
    const Real k = Real(i);
    jacobi(i, i - 1) = jacobi(i - 1, i) = k / std::sqrt(Real(4) * k * k - Real(1));
  }
  Eigen::SelfAdjointEigenSolver<RealMatrixX<Real>> es(jacobi);
  const Real half = (b - a) / Real(2);
  const Real mid = (b + a) / Real(2);
  QuadratureRule<Real> rule;
  rule.nodes = (es.eigenvalues().array() * half + mid).matrix();
  rule.weights = (es.eigenvectors().row(0).transpose().array().square() * Real(2) * half).matrix();
  return rule;
}

/// Composite Gauss-Legendre: `panels` equal subintervals of [a, b].
template <typename Real = double, typename F>
Real integrate(F&& f, Real a, Real b, Index panels = 16, Index order = 20) {
  const Real h = (b - a) / Real(panels);
  const QuadratureRule<Real> base = gaussLegendre<Real>(order, Real(0), h);
  Real s = Real(0);
  for (Index p = 0; p < panels; ++p) {
    const Real left = a + Real(p) * h;
    s += base.integrate([&](Real x) { return f(left + x); });
  }
  return s;
}

}  // namespace gapsphere

#endif  // GAPSPHERE_QUADRATURE_HPP
