#ifndef GAPSPHERE_SUBSYSTEM_HPP
#define GAPSPHERE_SUBSYSTEM_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gapsphere/gap.hpp"
#include "gapsphere/hilbert.hpp"

namespace gapsphere {

/// Partial inner products with norm below this are treated as exact zeros.
inline constexpr double kZeroRowNorm = 1e-14;

/// tr_2 |psi><psi|.
template <typename Real = double>
DensityMatrix<Real> reducedDensity(const StateVector<Real>& psi, const BipartiteSplit& split) {
  if (psi.dim() != split.total()) throw ContractViolation("reducedDensity: dimension mismatch");
  const MatrixX<Real> m = coefficientMatrix<Real>(psi.vector(), split);
  MatrixX<Real> r = m * m.adjoint();
  r = (r + r.adjoint().eval()) / Real(2);
  r /= r.trace().real();
  return DensityMatrix<Real>(Unchecked{}, std::move(r));
}

template <typename Real = double>
struct ConditionalDraw {
  Index q2 = 0;
  StateVector<Real> psi1;
  /// |<q2|psi>|^2
  Real probability = Real(0);
};

/// mu_1^psi as an exact finite mixture. Basis vectors with <q2|psi> = 0 carry
/// no probability and are listed in excluded instead of producing a psi1.
template <typename Real = double>
struct ConditionalEnsemble {
  std::vector<ConditionalDraw<Real>> draws;
  std::vector<Index> excluded;
};

namespace detail {
/// Columns of rows are the vectors <q2|psi> for q2 = 0..d2-1.
template <typename Real>
ConditionalEnsemble<Real> ensembleFromPartials(const MatrixX<Real>& partials) {
  ConditionalEnsemble<Real> out;
  out.draws.reserve(partials.cols());
  Real total = Real(0);
  for (Index q = 0; q < partials.cols(); ++q) {
    const Real n2 = partials.col(q).squaredNorm();
    if (std::sqrt(n2) <= Real(kZeroRowNorm)) {
      out.excluded.push_back(q);
      continue;
    }
    total += n2;
    out.draws.push_back({q, StateVector<Real>(partials.col(q) / std::sqrt(n2)), n2});
  }
  // Renormalize away rounding so probabilities sum to 1.
  for (auto& d : out.draws) d.probability /= total;
  return out;
}

template <typename Real>
MatrixX<Real> allPartials(const StateVector<Real>& psi, const UnitaryMatrix<Real>& basis, const BipartiteSplit& split) {
  require(psi.dim() == split.total(), "conditional wave function: state dimension differs from d1 * d2");
  require(basis.dim() == split.d2, "conditional wave function: basis dimension differs from d2");
  return coefficientMatrix<Real>(psi.vector(), split) * basis.matrix().conjugate();
}
}  // namespace detail

/// Every conditional wave function N <q2|psi> with its probability |<q2|psi>|^2.
template <typename Real = double>
ConditionalEnsemble<Real> conditionalEnsemble(const StateVector<Real>& psi, const UnitaryMatrix<Real>& basis,
                                              const BipartiteSplit& split) {
  return detail::ensembleFromPartials<Real>(detail::allPartials(psi, basis, split));
}

/// Conditional ensemble for the basis whose vectors overlap the Schmidt
/// vectors as overlaps(q2, i) = <q2|phi_i>. For a Haar-random basis these
/// overlaps form a Haar-random k-column isometry, so drawing the isometry
/// directly gives the same law as drawing the whole basis.
template <typename Real = double>
ConditionalEnsemble<Real> conditionalEnsembleFromOverlaps(const SchmidtDecomposition<Real>& schmidtForm,
                                                          const MatrixX<Real>& overlaps) {
  require(overlaps.cols() == schmidtForm.coefficients.size(), "conditionalEnsembleFromOverlaps: column mismatch");
  const MatrixX<Real> partials =
      schmidtForm.leftBasis * schmidtForm.coefficients.template cast<Complex<Real>>().asDiagonal() *
      overlaps.transpose();
  return detail::ensembleFromPartials<Real>(partials);
}

/// Q2 drawn with probability |<q2|psi>|^2, psi1 = <Q2|psi> normalized.
template <typename Real = double>
ConditionalDraw<Real> conditionalDraw(const StateVector<Real>& psi, const UnitaryMatrix<Real>& basis,
                                      const BipartiteSplit& split, RngStream& rng) {
  const MatrixX<Real> partials = detail::allPartials(psi, basis, split);
  const RealVectorX<Real> weights = partials.colwise().squaredNorm().transpose();
  const double target = rng.uniform() * double(weights.sum());
  double acc = 0.0;
  Index chosen = -1;
  for (Index q = 0; q < weights.size(); ++q) {
    if (weights(q) <= Real(0)) continue;
    chosen = q;
    acc += double(weights(q));
    if (target < acc) break;
  }
  require(chosen >= 0, "conditionalDraw: state has no nonzero partial inner product");
  const Real n2 = weights(chosen);
  return {chosen, StateVector<Real>(partials.col(chosen) / std::sqrt(n2)), n2 / weights.sum()};
}

/// Uniform draw from {psi : tr_2 |psi><psi| = rho1}: psi = sum_i sqrt(p_i) chi_i (x) phi_i
/// with {phi_i} a Haar-random orthonormal system of rank(rho1) vectors in C^{d2}.
template <typename Real = double>
StateVector<Real> sampleFixedReduced(const SpectralDecomposition<Real>& rho1, Index d2, RngStream& rng,
                                     double rankTol = tolerances::rank) {
  std::vector<Index> support;
  for (Index i = 0; i < rho1.dim(); ++i)
    if (rho1.eigenvalues(i) > Real(rankTol)) support.push_back(i);
  const Index k = static_cast<Index>(support.size());
  require(k >= 1, "sampleFixedReduced: density matrix has empty support");
  if (k > d2) throw ContractViolation("sampleFixedReduced: rank of rho1 exceeds d2");
  const BipartiteSplit split(rho1.dim(), d2);
  const OrthonormalSystem<Real> phi = haarOrthonormalSystem<Real>(d2, k, rng);
  MatrixX<Real> m = MatrixX<Real>::Zero(split.d1, split.d2);
  for (Index j = 0; j < k; ++j)
    m += std::sqrt(rho1.eigenvalues(support[j])) * rho1.eigenvectors.col(support[j]) * phi.vectors().col(j).transpose();
  return StateVector<Real>(fromCoefficientMatrix<Real>(m), 1e-10);
}

template <typename Real = double>
StateVector<Real> sampleFixedReduced(const DensityMatrix<Real>& rho1, Index d2, RngStream& rng,
                                     double rankTol = tolerances::rank) {
  return sampleFixedReduced(spectral(rho1), d2, rng, rankTol);
}

/// Spectral subspace of H for eigenvalues in the closed window [E, E + delta].
template <typename Real = double>
struct MicrocanonicalSpec {
  Real energy = Real(0);
  Real delta = Real(0);
  RealVectorX<Real> levels;
  OrthonormalSystem<Real> subspace;

  Index dim() const { return subspace.count(); }

  /// P / dim P.
  DensityMatrix<Real> rho() const {
    MatrixX<Real> p = subspace.vectors() * subspace.vectors().adjoint() / Real(dim());
    return DensityMatrix<Real>(Unchecked{}, std::move(p));
  }
};

template <typename Real = double>
MicrocanonicalSpec<Real> microcanonicalSpec(const SpectralDecomposition<Real>& h, Real energy, Real delta) {
  require(delta >= Real(0), "microcanonicalSpec: negative window width");
  std::vector<Index> inWindow;
  for (Index n = 0; n < h.dim(); ++n)
    if (h.eigenvalues(n) >= energy && h.eigenvalues(n) <= energy + delta) inWindow.push_back(n);
  if (inWindow.empty()) throw ContractViolation("microcanonicalSpec: no eigenvalue in [E, E + delta]");
  RealVectorX<Real> levels(inWindow.size());
  MatrixX<Real> basis(h.dim(), static_cast<Index>(inWindow.size()));
  for (std::size_t j = 0; j < inWindow.size(); ++j) {
    levels(j) = h.eigenvalues(inWindow[j]);
    basis.col(j) = h.eigenvectors.col(inWindow[j]);
  }
  return {energy, delta, std::move(levels), OrthonormalSystem<Real>(Unchecked{}, std::move(basis))};
}

template <typename Real = double>
MicrocanonicalSpec<Real> microcanonicalSpec(const HermitianOperator<Real>& h, Real energy, Real delta) {
  return microcanonicalSpec(spectral(h), energy, delta);
}

/// Window of H1 (x) I + I (x) H2 built from the factor spectra, without forming
/// the full eigenvector matrix.
template <typename Real = double>
MicrocanonicalSpec<Real> compositeMicrocanonicalSpec(const SpectralDecomposition<Real>& h1,
                                                     const SpectralDecomposition<Real>& h2, Real energy, Real delta) {
  require(delta >= Real(0), "compositeMicrocanonicalSpec: negative window width");
  struct Level {
    Real e;
    Index i, j;
  };
  std::vector<Level> window;
  for (Index i = 0; i < h1.dim(); ++i)
    for (Index j = 0; j < h2.dim(); ++j) {
      const Real e = h1.eigenvalues(i) + h2.eigenvalues(j);
      if (e >= energy && e <= energy + delta) window.push_back({e, i, j});
    }
  if (window.empty()) throw ContractViolation("compositeMicrocanonicalSpec: no eigenvalue in [E, E + delta]");
  std::stable_sort(window.begin(), window.end(), [](const Level& a, const Level& b) { return a.e < b.e; });
  RealVectorX<Real> levels(window.size());
  MatrixX<Real> basis(h1.dim() * h2.dim(), static_cast<Index>(window.size()));
  for (std::size_t n = 0; n < window.size(); ++n) {
    levels(n) = window[n].e;
    basis.col(n) = kron<Real>(VectorX<Real>(h1.eigenvectors.col(window[n].i)),
                              VectorX<Real>(h2.eigenvectors.col(window[n].j)));
  }
  return {energy, delta, std::move(levels), OrthonormalSystem<Real>(Unchecked{}, std::move(basis))};
}

/// Uniform draw on the unit sphere of the window subspace.
template <typename Real = double>
StateVector<Real> sampleMicrocanonical(const MicrocanonicalSpec<Real>& spec, RngStream& rng) {
  return sampleUniformSubspace(spec.subspace, rng);
}

/// H1 (x) I2 + I1 (x) H2.
template <typename Real = double>
HermitianOperator<Real> compositeHamiltonian(const HermitianOperator<Real>& h1, const HermitianOperator<Real>& h2) {
  const Index d1 = h1.dim();
  const Index d2 = h2.dim();
  requireDimension(d1 * d2, "compositeHamiltonian");
  MatrixX<Real> h = kron<Real>(h1.matrix(), MatrixX<Real>::Identity(d2, d2)) +
                    kron<Real>(MatrixX<Real>::Identity(d1, d1), h2.matrix());
  return HermitianOperator<Real>(std::move(h));
}

/// Eigenpairs of H1 (x) I + I (x) H2 as sums of eigenvalues and products of eigenvectors.
template <typename Real = double>
SpectralDecomposition<Real> compositeSpectral(const SpectralDecomposition<Real>& h1,
                                              const SpectralDecomposition<Real>& h2) {
  const Index d1 = h1.dim();
  const Index d2 = h2.dim();
  requireDimension(d1 * d2, "compositeSpectral");
  std::vector<Index> order(d1 * d2);
  std::iota(order.begin(), order.end(), Index(0));
  auto energy = [&](Index n) { return h1.eigenvalues(n / d2) + h2.eigenvalues(n % d2); };
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return energy(a) < energy(b); });
  SpectralDecomposition<Real> out{RealVectorX<Real>(d1 * d2), MatrixX<Real>(d1 * d2, d1 * d2)};
  for (Index n = 0; n < d1 * d2; ++n) {
    const Index i = order[n] / d2;
    const Index j = order[n] % d2;
    out.eigenvalues(n) = energy(order[n]);
    out.eigenvectors.col(n) = kron<Real>(VectorX<Real>(h1.eigenvectors.col(i)), VectorX<Real>(h2.eigenvectors.col(j)));
  }
  return out;
}

}  // namespace gapsphere

#endif  // GAPSPHERE_SUBSYSTEM_HPP
