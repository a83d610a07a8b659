#ifndef GAPSPHERE_CORE_HPP
#define GAPSPHERE_CORE_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gapsphere {

using Index = Eigen::Index;

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using VectorX = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using MatrixX = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using RealVectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
using RealMatrixX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

/// Unnormalized element of C^d (a Gaussian draw, a partial inner product).
template <typename Real>
using RawVector = VectorX<Real>;

/// Thrown when an input violates a documented precondition.
class ContractViolation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation is evaluated outside its mathematical domain.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Default numerical tolerances. Every checking routine takes one of these
/// values as a defaulted argument so callers can override per call.
namespace tolerances {
inline constexpr double hermitian = 1e-12;
inline constexpr double norm = 1e-12;
inline constexpr double trace = 1e-12;
inline constexpr double negativeEigenvalue = 1e-12;
/// Largest negative eigenvalue spectral() will clamp to zero for a density matrix.
inline constexpr double clamp = 1e-10;
inline constexpr double unitary = 1e-10;
inline constexpr double orthonormal = 1e-10;
inline constexpr double reconstruction = 1e-10;
/// Eigenvalues of rho at or below this count as outside support(rho).
inline constexpr double rank = 1e-12;
/// Components outside support(rho) above this make a density evaluate to zero.
inline constexpr double component = 1e-8;
}  // namespace tolerances

/// Total dimension cap for dense algebra.
inline constexpr Index kMaxDimension = 4096;

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

inline void requireDimension(Index d, const char* what) {
  if (d < 1 || d > kMaxDimension)
    throw ContractViolation(std::string(what) + ": dimension " + std::to_string(d) +
                            " outside [1, " + std::to_string(kMaxDimension) + "]");
}

}  // namespace gapsphere

#endif  // GAPSPHERE_CORE_HPP
