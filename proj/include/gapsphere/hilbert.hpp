#ifndef GAPSPHERE_HILBERT_HPP
#define GAPSPHERE_HILBERT_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include "gapsphere/core.hpp"
#include "gapsphere/random.hpp"

namespace gapsphere {

/// Marker for factories whose output satisfies the invariant by construction.
struct Unchecked {};

template <typename Real>
Real maxAbs(const MatrixX<Real>& a) {
  return a.size() == 0 ? Real(0) : a.cwiseAbs().maxCoeff();
}

/// Hermiticity up to tol, scaled by max(1, max |a_ij|).
template <typename Real>
bool isHermitian(const MatrixX<Real>& a, double tol = tolerances::hermitian) {
  if (a.rows() != a.cols()) return false;
  const Real scale = std::max(Real(1), maxAbs<Real>(a));
  return maxAbs<Real>(a - a.adjoint()) <= Real(tol) * scale;
}

/// Max entry of |A*A - I|.
template <typename Real>
Real isometryDefect(const MatrixX<Real>& a) {
  const MatrixX<Real> gram = a.adjoint() * a;
  return maxAbs<Real>(gram - MatrixX<Real>::Identity(gram.rows(), gram.cols()));
}

template <typename Real = double>
class StateVector {
public:
  explicit StateVector(VectorX<Real> amplitudes, double tol = tolerances::norm)
      : v_(std::move(amplitudes)) {
    require(v_.size() >= 1, "StateVector: empty vector");
    require(v_.allFinite(), "StateVector: non-finite entry");
    require(std::abs(v_.norm() - Real(1)) <= Real(tol), "StateVector: norm differs from 1");
  }

  /// Basis vector |n> of C^d.
  static StateVector basis(Index d, Index n) {
    require(n >= 0 && n < d, "StateVector::basis: index out of range");
    VectorX<Real> v = VectorX<Real>::Zero(d);
    v(n) = Real(1);
    return StateVector(std::move(v));
  }

  const VectorX<Real>& vector() const { return v_; }
  Index dim() const { return v_.size(); }
  Complex<Real> operator()(Index i) const { return v_(i); }

private:
  VectorX<Real> v_;
};

template <typename Real = double>
class HermitianOperator {
public:
  explicit HermitianOperator(MatrixX<Real> m, double tol = tolerances::hermitian) : m_(std::move(m)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, "HermitianOperator: matrix must be square");
    require(m_.allFinite(), "HermitianOperator: non-finite entry");
    require(isHermitian<Real>(m_, tol), "HermitianOperator: matrix is not Hermitian");
    m_ = (m_ + m_.adjoint().eval()) / Real(2);
  }

  static HermitianOperator diagonal(const RealVectorX<Real>& energies) {
    return HermitianOperator(energies.template cast<Complex<Real>>().asDiagonal().toDenseMatrix());
  }

  const MatrixX<Real>& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }

private:
  MatrixX<Real> m_;
};

template <typename Real = double>
class DensityMatrix {
public:
  /// Checks Hermiticity, unit trace and positivity (one eigensolve).
  explicit DensityMatrix(MatrixX<Real> m, double hermitianTol = tolerances::hermitian,
                         double traceTol = tolerances::trace,
                         double negativeTol = tolerances::negativeEigenvalue)
      : m_(std::move(m)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, "DensityMatrix: matrix must be square");
    requireDimension(m_.rows(), "DensityMatrix");
    require(m_.allFinite(), "DensityMatrix: non-finite entry");
    require(isHermitian<Real>(m_, hermitianTol), "DensityMatrix: matrix is not Hermitian");
    m_ = (m_ + m_.adjoint().eval()) / Real(2);
    require(std::abs(m_.trace().real() - Real(1)) <= Real(traceTol), "DensityMatrix: trace differs from 1");
    Eigen::SelfAdjointEigenSolver<MatrixX<Real>> es(m_, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -Real(negativeTol), "DensityMatrix: negative eigenvalue");
  }

  DensityMatrix(Unchecked, MatrixX<Real> m) : m_(std::move(m)) {}

  /// V diag(p) V* for orthonormal columns V and probability weights p.
  static DensityMatrix fromSpectrum(const RealVectorX<Real>& p, const MatrixX<Real>& v) {
    require(p.size() == v.cols(), "DensityMatrix::fromSpectrum: size mismatch");
    require(p.size() == 0 || p.minCoeff() >= Real(0), "DensityMatrix::fromSpectrum: negative weight");
    require(std::abs(p.sum() - Real(1)) <= Real(tolerances::reconstruction),
            "DensityMatrix::fromSpectrum: weights do not sum to 1");
    require(isometryDefect<Real>(v) <= Real(tolerances::orthonormal),
            "DensityMatrix::fromSpectrum: columns not orthonormal");
    MatrixX<Real> m = v * p.template cast<Complex<Real>>().asDiagonal() * v.adjoint();
    m = (m + m.adjoint().eval()) / Real(2);
    return DensityMatrix(Unchecked{}, std::move(m));
  }

  static DensityMatrix diagonal(const RealVectorX<Real>& p) {
    return fromSpectrum(p, MatrixX<Real>::Identity(p.size(), p.size()));
  }

  static DensityMatrix maximallyMixed(Index d) {
    return DensityMatrix(Unchecked{}, MatrixX<Real>::Identity(d, d) / Real(d));
  }

  static DensityMatrix pure(const StateVector<Real>& psi) {
    return DensityMatrix(Unchecked{}, psi.vector() * psi.vector().adjoint());
  }

  const MatrixX<Real>& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }

private:
  MatrixX<Real> m_;
};

template <typename Real = double>
class UnitaryMatrix {
public:
  explicit UnitaryMatrix(MatrixX<Real> m, double tol = tolerances::unitary) : m_(std::move(m)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, "UnitaryMatrix: matrix must be square");
    require(isometryDefect<Real>(m_) <= Real(tol), "UnitaryMatrix: U*U differs from I");
  }
  UnitaryMatrix(Unchecked, MatrixX<Real> m) : m_(std::move(m)) {}

  static UnitaryMatrix identity(Index d) { return UnitaryMatrix(Unchecked{}, MatrixX<Real>::Identity(d, d)); }

  const MatrixX<Real>& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }
  UnitaryMatrix adjoint() const { return UnitaryMatrix(Unchecked{}, m_.adjoint()); }

private:
  MatrixX<Real> m_;
};

/// k orthonormal columns in C^m.
template <typename Real = double>
class OrthonormalSystem {
public:
  explicit OrthonormalSystem(MatrixX<Real> vectors, double tol = tolerances::orthonormal)
      : m_(std::move(vectors)) {
    require(m_.cols() <= m_.rows(), "OrthonormalSystem: more vectors than dimensions");
    require(isometryDefect<Real>(m_) <= Real(tol), "OrthonormalSystem: columns not orthonormal");
  }
  OrthonormalSystem(Unchecked, MatrixX<Real> vectors) : m_(std::move(vectors)) {}

  const MatrixX<Real>& vectors() const { return m_; }
  Index dim() const { return m_.rows(); }
  Index count() const { return m_.cols(); }

private:
  MatrixX<Real> m_;
};

/// Eigenpairs with ascending eigenvalues and orthonormal eigenvector columns.
template <typename Real = double>
struct SpectralDecomposition {
  RealVectorX<Real> eigenvalues;
  MatrixX<Real> eigenvectors;

  MatrixX<Real> reconstruct() const {
    return eigenvectors * eigenvalues.template cast<Complex<Real>>().asDiagonal() * eigenvectors.adjoint();
  }
  Index dim() const { return eigenvalues.size(); }
};

template <typename Real = double>
SpectralDecomposition<Real> spectral(const HermitianOperator<Real>& a) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Real>> es(a.matrix());
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Eigenvalues are clamped to [0, 1]; a negative eigenvalue below -clampTol
/// is a contract violation rather than silently clamped.
template <typename Real = double>
SpectralDecomposition<Real> spectral(const DensityMatrix<Real>& rho, double clampTol = tolerances::clamp) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Real>> es(rho.matrix());
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral: eigensolver failed");
  RealVectorX<Real> p = es.eigenvalues();
  if (p.minCoeff() < -Real(clampTol))
    throw ContractViolation("spectral: density matrix eigenvalue below -" + std::to_string(clampTol));
  p = p.cwiseMax(Real(0)).cwiseMin(Real(1));
  return {std::move(p), es.eigenvectors()};
}

namespace detail {
/// Q from a QR factorization with R's diagonal made real positive.
template <typename Real>
MatrixX<Real> phaseCorrectedQ(const MatrixX<Real>& gaussian) {
  const Index m = gaussian.rows();
  const Index k = gaussian.cols();
  Eigen::HouseholderQR<MatrixX<Real>> qr(gaussian);
  MatrixX<Real> q = qr.householderQ() * MatrixX<Real>::Identity(m, k);
  const MatrixX<Real>& packed = qr.matrixQR();
  for (Index j = 0; j < k; ++j) {
    const Complex<Real> r = packed(j, j);
    const Real a = std::abs(r);
    if (a > Real(0)) q.col(j) *= r / a;
  }
  return q;
}
}  // namespace detail

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of diag(R) moved into Q.
template <typename Real = double>
UnitaryMatrix<Real> haarUnitary(Index d, RngStream& rng) {
  requireDimension(d, "haarUnitary");
  return UnitaryMatrix<Real>(Unchecked{}, detail::phaseCorrectedQ<Real>(complexGaussianMatrix<Real>(d, d, rng)));
}

/// Uniform orthonormal k-system in C^m. Consumes the stream exactly like the
/// first k columns of haarUnitary(m), so it reproduces those columns.
template <typename Real = double>
OrthonormalSystem<Real> haarOrthonormalSystem(Index m, Index k, RngStream& rng) {
  requireDimension(m, "haarOrthonormalSystem");
  require(k >= 0 && k <= m, "haarOrthonormalSystem: k exceeds m");
  return OrthonormalSystem<Real>(Unchecked{}, detail::phaseCorrectedQ<Real>(complexGaussianMatrix<Real>(m, k, rng)));
}

/// Normalization phi / |phi|.
template <typename Real = double>
StateVector<Real> projectToSphere(const RawVector<Real>& phi) {
  require(phi.size() >= 1, "projectToSphere: empty vector");
  require(phi.allFinite(), "projectToSphere: non-finite entry");
  const Real n = phi.norm();
  if (!(n > Real(0))) throw DomainError("projectToSphere: zero vector has no projection");
  return StateVector<Real>(phi / n);
}

struct BipartiteSplit {
  Index d1 = 1;
  Index d2 = 1;

  BipartiteSplit() = default;
  BipartiteSplit(Index first, Index second) : d1(first), d2(second) {
    require(d1 >= 1 && d2 >= 1, "BipartiteSplit: dimensions must be positive");
    requireDimension(d1 * d2, "BipartiteSplit");
  }
  Index total() const { return d1 * d2; }
};

/// psi in C^{d1 d2} as the d1 x d2 coefficient matrix, psi(i1 * d2 + i2) = M(i1, i2).
template <typename Real>
MatrixX<Real> coefficientMatrix(const VectorX<Real>& psi, const BipartiteSplit& split) {
  require(psi.size() == split.total(), "coefficientMatrix: dimension mismatch");
  return Eigen::Map<const Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      psi.data(), split.d1, split.d2);
}

template <typename Real>
VectorX<Real> fromCoefficientMatrix(const MatrixX<Real>& m) {
  VectorX<Real> psi(m.size());
  Eigen::Map<Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(psi.data(), m.rows(),
                                                                                          m.cols()) = m;
  return psi;
}

template <typename Real>
MatrixX<Real> kron(const MatrixX<Real>& a, const MatrixX<Real>& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

template <typename Real>
VectorX<Real> kron(const VectorX<Real>& a, const VectorX<Real>& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

/// psi = sum_i c_i chi_i (x) phi_i with c descending; min(d1, d2) terms, zero
/// coefficients included.
template <typename Real = double>
struct SchmidtDecomposition {
  RealVectorX<Real> coefficients;
  MatrixX<Real> leftBasis;
  MatrixX<Real> rightSystem;

  VectorX<Real> reconstruct() const {
    MatrixX<Real> m = leftBasis * coefficients.template cast<Complex<Real>>().asDiagonal() * rightSystem.transpose();
    return fromCoefficientMatrix<Real>(m);
  }
};

template <typename Real = double>
SchmidtDecomposition<Real> schmidt(const StateVector<Real>& psi, const BipartiteSplit& split) {
  if (psi.dim() != split.total()) throw ContractViolation("schmidt: d1 * d2 differs from state dimension");
  Eigen::JacobiSVD<MatrixX<Real>> svd(coefficientMatrix<Real>(psi.vector(), split),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  // M = U S V*, so psi = sum s_i u_i (x) conj(v_i).
  return {svd.singularValues(), svd.matrixU(), svd.matrixV().conjugate()};
}

/// The C^{d1} vector <q2|psi>, where |q2> is column q2 of basis.
template <typename Real = double>
RawVector<Real> partialInner(Index q2, const StateVector<Real>& psi, const UnitaryMatrix<Real>& basis,
                             const BipartiteSplit& split) {
  require(basis.dim() == split.d2, "partialInner: basis dimension differs from d2");
  if (q2 < 0 || q2 >= split.d2) throw ContractViolation("partialInner: basis index out of range");
  return coefficientMatrix<Real>(psi.vector(), split) * basis.matrix().col(q2).conjugate();
}

}  // namespace gapsphere

#endif  // GAPSPHERE_HILBERT_HPP
