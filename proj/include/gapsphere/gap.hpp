#ifndef GAPSPHERE_GAP_HPP
#define GAPSPHERE_GAP_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "gapsphere/hilbert.hpp"

namespace gapsphere {

/// A density matrix prepared for Gaussian sampling: its eigenpairs and the
/// part of the spectrum above rankTol, which spans support(rho).
template <typename Real = double>
class GapSpec {
public:
  explicit GapSpec(DensityMatrix<Real> rho, double rankTol = tolerances::rank)
      : GapSpec(rho, spectral(rho), rankTol) {}

  /// Uses the given eigenbasis; any eigenbasis of a degenerate rho gives the
  /// same measures.
  GapSpec(DensityMatrix<Real> rho, SpectralDecomposition<Real> eig, double rankTol = tolerances::rank)
      : rho_(std::move(rho)), eig_(std::move(eig)) {
    require(eig_.dim() == rho_.dim(), "GapSpec: decomposition dimension mismatch");
    std::vector<Index> keep;
    for (Index n = 0; n < eig_.dim(); ++n)
      if (eig_.eigenvalues(n) > Real(rankTol)) keep.push_back(n);
    require(!keep.empty(), "GapSpec: density matrix has empty support");
    const Index k = static_cast<Index>(keep.size());
    weights_.resize(k);
    basis_.resize(rho_.dim(), k);
    for (Index j = 0; j < k; ++j) {
      weights_(j) = eig_.eigenvalues(keep[j]);
      basis_.col(j) = eig_.eigenvectors.col(keep[j]);
    }
    // Drop sub-tolerance mass so the Gaussian covariance has unit trace.
    weights_ /= weights_.sum();
  }

  const DensityMatrix<Real>& rho() const { return rho_; }
  const SpectralDecomposition<Real>& decomposition() const { return eig_; }
  Index dim() const { return rho_.dim(); }
  Index rank() const { return weights_.size(); }
  /// Positive eigenvalues p_n, aligned with supportBasis() columns.
  const RealVectorX<Real>& weights() const { return weights_; }
  const MatrixX<Real>& supportBasis() const { return basis_; }
  MatrixX<Real> supportProjector() const { return basis_ * basis_.adjoint(); }

private:
  DensityMatrix<Real> rho_;
  SpectralDecomposition<Real> eig_;
  RealVectorX<Real> weights_;
  MatrixX<Real> basis_;
};

template <typename Real = double>
struct WeightedSample {
  VectorX<Real> vector;
  Real weight = Real(1);
};

enum class ReferenceMeasure {
  LebesgueOnSupport,     // Lebesgue measure on support(rho) = C^k
  SurfaceOnSupportSphere // unnormalized (2k-1)-dimensional area on S(support(rho))
};

inline const char* toString(ReferenceMeasure m) {
  return m == ReferenceMeasure::LebesgueOnSupport ? "lebesgue-on-support" : "surface-on-support-sphere";
}

template <typename Real = double>
struct DensityValue {
  Real value = Real(0);
  ReferenceMeasure reference = ReferenceMeasure::LebesgueOnSupport;
  /// Set when the argument has a component outside support(rho); value is 0.
  bool outsideSupport = false;
};

/// Psi^G = sum_n Z_n |n>, independent Z_n with E|Z_n|^2 = p_n.
template <typename Real = double>
RawVector<Real> sampleG(const GapSpec<Real>& spec, RngStream& rng) {
  VectorX<Real> z(spec.rank());
  for (Index n = 0; n < spec.rank(); ++n) z(n) = rng.complexNormal<Real>(spec.weights()(n));
  return spec.supportBasis() * z;
}

/// Exact draw from |psi|^2 G(rho)(dpsi). The moduli density
/// (sum_n s_n) prod_n exp(-s_n/p_n)/p_n is the p_n-weighted mixture over a
/// distinguished index n whose s_n is Gamma(2, p_n); all other s_m are
/// exponential with mean p_m. Phases are independent and uniform.
template <typename Real = double>
RawVector<Real> sampleGA(const GapSpec<Real>& spec, RngStream& rng) {
  const auto& p = spec.weights();
  const Index k = spec.rank();
  const double u = rng.uniform();
  Index chosen = k - 1;
  double acc = 0.0;
  for (Index n = 0; n < k; ++n) {
    acc += double(p(n));
    if (u < acc) {
      chosen = n;
      break;
    }
  }
  VectorX<Real> z(k);
  for (Index n = 0; n < k; ++n) {
    const double mean = double(p(n));
    double s = rng.exponential(mean);
    if (n == chosen) s += rng.exponential(mean);
    z(n) = std::sqrt(Real(s)) * rng.phase<Real>();
  }
  return spec.supportBasis() * z;
}

template <typename Real = double>
StateVector<Real> sampleGAP(const GapSpec<Real>& spec, RngStream& rng) {
  return projectToSphere<Real>(sampleGA(spec, rng));
}

/// P(Psi^G): the naive projection, whose covariance is not rho in general.
template <typename Real = double>
StateVector<Real> sampleProjectedGaussian(const GapSpec<Real>& spec, RngStream& rng) {
  return projectToSphere<Real>(sampleG(spec, rng));
}

/// Uniform measure on the unit sphere of C^d.
template <typename Real = double>
StateVector<Real> sampleUniformSphere(Index d, RngStream& rng) {
  requireDimension(d, "sampleUniformSphere");
  return projectToSphere<Real>(complexGaussianVector<Real>(d, rng));
}

/// Uniform measure on the unit sphere of the span of an orthonormal system.
template <typename Real = double>
StateVector<Real> sampleUniformSubspace(const OrthonormalSystem<Real>& subspace, RngStream& rng) {
  require(subspace.count() >= 1, "sampleUniformSubspace: empty subspace");
  return projectToSphere<Real>(subspace.vectors() * complexGaussianVector<Real>(subspace.count(), rng));
}

namespace detail {
template <typename Real>
bool outsideSupport(const GapSpec<Real>& spec, const VectorX<Real>& psi, const VectorX<Real>& coords,
                    double componentTol) {
  return (psi - spec.supportBasis() * coords).norm() > Real(componentTol);
}

template <typename Real>
Real inverseQuadratic(const GapSpec<Real>& spec, const VectorX<Real>& coords) {
  return (coords.cwiseAbs2().array() / spec.weights().array()).sum();
}

template <typename Real>
Real logDeterminant(const GapSpec<Real>& spec) {
  return spec.weights().array().log().sum();
}
}  // namespace detail

/// (1 / (pi^k det rho_+)) exp(-<psi|rho_+^{-1}|psi>) relative to Lebesgue measure on support(rho).
template <typename Real = double>
DensityValue<Real> densityG(const GapSpec<Real>& spec, const RawVector<Real>& psi,
                            double componentTol = tolerances::component) {
  require(psi.size() == spec.dim(), "densityG: dimension mismatch");
  const VectorX<Real> c = spec.supportBasis().adjoint() * psi;
  DensityValue<Real> out;
  out.reference = ReferenceMeasure::LebesgueOnSupport;
  if (detail::outsideSupport(spec, psi, c, componentTol)) {
    out.outsideSupport = true;
    return out;
  }
  const Real k = Real(spec.rank());
  const Real logValue =
      -k * std::log(std::numbers::pi_v<Real>) - detail::logDeterminant(spec) - detail::inverseQuadratic(spec, c);
  out.value = std::exp(logValue);
  return out;
}

/// densityG multiplied by |psi|^2.
template <typename Real = double>
DensityValue<Real> densityGA(const GapSpec<Real>& spec, const RawVector<Real>& psi,
                             double componentTol = tolerances::component) {
  DensityValue<Real> out = densityG(spec, psi, componentTol);
  out.value *= psi.squaredNorm();
  return out;
}

/// (k! / (2 pi^k det rho_+)) <psi|rho_+^{-1}|psi>^{-k-1} relative to the
/// unnormalized surface measure on the unit sphere of support(rho). Divide
/// by the sphere area 2 pi^k / (k-1)! to get the density against the
/// normalized uniform measure instead.
template <typename Real = double>
DensityValue<Real> densityGAP(const GapSpec<Real>& spec, const StateVector<Real>& psi,
                              double componentTol = tolerances::component) {
  require(psi.dim() == spec.dim(), "densityGAP: dimension mismatch");
  const VectorX<Real> c = spec.supportBasis().adjoint() * psi.vector();
  DensityValue<Real> out;
  out.reference = ReferenceMeasure::SurfaceOnSupportSphere;
  if (detail::outsideSupport(spec, psi.vector(), c, componentTol)) {
    out.outsideSupport = true;
    return out;
  }
  const Real k = Real(spec.rank());
  const Real logValue = std::lgamma(k + Real(1)) - std::log(Real(2)) - k * std::log(std::numbers::pi_v<Real>) -
                        detail::logDeterminant(spec) - (k + Real(1)) * std::log(detail::inverseQuadratic(spec, c));
  out.value = std::exp(logValue);
  return out;
}

/// Reweights by |psi|^2 and normalizes each vector: the sample-level form of P_*(A(mu)).
template <typename Real = double>
std::vector<WeightedSample<Real>> adjustAndProject(const std::vector<WeightedSample<Real>>& samples) {
  require(!samples.empty(), "adjustAndProject: no samples");
  std::vector<WeightedSample<Real>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const Real n2 = s.vector.squaredNorm();
    if (!(n2 > Real(0))) throw DomainError("adjustAndProject: zero vector among samples");
    out.push_back({s.vector / std::sqrt(n2), s.weight * n2});
  }
  return out;
}

}  // namespace gapsphere

#endif  // GAPSPHERE_GAP_HPP
