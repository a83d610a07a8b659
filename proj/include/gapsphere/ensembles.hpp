#ifndef GAPSPHERE_ENSEMBLES_HPP
#define GAPSPHERE_ENSEMBLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "gapsphere/gap.hpp"
#include "gapsphere/hilbert.hpp"

namespace gapsphere {

/// Eigenvalues closer than this are grouped into one eigenspace.
inline constexpr double kDegeneracyTol = 1e-10;

template <typename Real = double>
struct CanonicalSpec {
  HermitianOperator<Real> hamiltonian;
  Real beta = Real(0);
  /// log tr exp(-beta H); Z itself may overflow for large beta |E|.
  Real logPartition = Real(0);

  Real partition() const { return std::exp(logPartition); }
};

/// Boltzmann weights exp(-beta E_n) / Z, shifted by min E for stability.
template <typename Real = double>
RealVectorX<Real> boltzmannWeights(const RealVectorX<Real>& energies, Real beta, Real* logPartition = nullptr) {
  require(std::isfinite(double(beta)) && beta >= Real(0), "boltzmannWeights: beta must be finite and >= 0");
  require(energies.size() >= 1, "boltzmannWeights: empty spectrum");
  const Real emin = energies.minCoeff();
  RealVectorX<Real> w = (-(beta) * (energies.array() - emin)).exp().matrix();
  const Real sum = w.sum();
  if (logPartition) *logPartition = -beta * emin + std::log(sum);
  return w / sum;
}

template <typename Real = double>
CanonicalSpec<Real> canonicalSpec(const HermitianOperator<Real>& h, Real beta) {
  Real logZ = Real(0);
  boltzmannWeights<Real>(spectral(h).eigenvalues, beta, &logZ);
  return {h, beta, logZ};
}

/// exp(-beta H) / tr exp(-beta H).
template <typename Real = double>
DensityMatrix<Real> canonicalRho(const HermitianOperator<Real>& h, Real beta) {
  const auto eig = spectral(h);
  return DensityMatrix<Real>::fromSpectrum(boltzmannWeights<Real>(eig.eigenvalues, beta), eig.eigenvectors);
}

/// Eigenspaces of a spectral decomposition: index ranges of (near-)equal eigenvalues.
template <typename Real = double>
struct Eigenspace {
  Real eigenvalue;
  MatrixX<Real> basis;
};

template <typename Real = double>
std::vector<Eigenspace<Real>> eigenspaces(const SpectralDecomposition<Real>& eig, double tol = kDegeneracyTol) {
  std::vector<Eigenspace<Real>> out;
  Index start = 0;
  for (Index n = 1; n <= eig.dim(); ++n) {
    if (n == eig.dim() || eig.eigenvalues(n) - eig.eigenvalues(n - 1) > Real(tol)) {
      const Index count = n - start;
      out.push_back({eig.eigenvalues.segment(start, count).mean(), eig.eigenvectors.middleCols(start, count)});
      start = n;
    }
  }
  return out;
}

/// EIG(rho): eigenspace H_p chosen with probability p dim(H_p), then a uniform
/// unit vector in it.
template <typename Real = double>
class EigSampler {
public:
  explicit EigSampler(const DensityMatrix<Real>& rho, double tol = kDegeneracyTol)
      : spaces_(eigenspaces(spectral(rho), tol)) {
    for (const auto& s : spaces_) cumulative_.push_back(double(s.eigenvalue) * double(s.basis.cols()));
    for (std::size_t i = 1; i < cumulative_.size(); ++i) cumulative_[i] += cumulative_[i - 1];
  }

  StateVector<Real> operator()(RngStream& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    std::size_t chosen = spaces_.size() - 1;
    for (std::size_t i = 0; i < cumulative_.size(); ++i)
      if (u < cumulative_[i] && spaces_[i].eigenvalue > Real(0)) {
        chosen = i;
        break;
      }
    const auto& basis = spaces_[chosen].basis;
    return projectToSphere<Real>(basis * complexGaussianVector<Real>(basis.cols(), rng));
  }

  const std::vector<Eigenspace<Real>>& spaces() const { return spaces_; }

private:
  std::vector<Eigenspace<Real>> spaces_;
  std::vector<double> cumulative_;
};

template <typename Real = double>
StateVector<Real> sampleEIG(const DensityMatrix<Real>& rho, RngStream& rng) {
  return EigSampler<Real>(rho)(rng);
}

/// Psi = sum_p sqrt(w_p) Psi_p with independent Psi_p uniform on the unit
/// sphere of eigenspace p. The weights w_p sum to 1; a nondegenerate
/// spectrum gives fixed moduli |Z_n| = sqrt(w_n) with uniform phases.
template <typename Real = double>
struct ExtremalSpec {
  RealVectorX<Real> weights;
  std::vector<MatrixX<Real>> eigenspaceBases;

  /// Thermal weights: eigenspace of energy E carries dim * exp(-beta E) / Z.
  static ExtremalSpec thermal(const HermitianOperator<Real>& h, Real beta, double tol = kDegeneracyTol) {
    return fromSpaces(eigenspaces(spectral(h), tol), [&](const auto& spaces) {
      RealVectorX<Real> e(spaces.size());
      for (std::size_t i = 0; i < spaces.size(); ++i) e(i) = spaces[i].eigenvalue;
      RealVectorX<Real> w = boltzmannWeights<Real>(e, beta);
      for (std::size_t i = 0; i < spaces.size(); ++i) w(i) *= Real(spaces[i].basis.cols());
      return RealVectorX<Real>(w / w.sum());
    });
  }

  /// Weights p dim(H_p) over the distinct eigenvalues of rho, so the covariance is rho.
  static ExtremalSpec fromDensity(const DensityMatrix<Real>& rho, double tol = kDegeneracyTol) {
    return fromSpaces(eigenspaces(spectral(rho), tol), [](const auto& spaces) {
      RealVectorX<Real> w(spaces.size());
      for (std::size_t i = 0; i < spaces.size(); ++i) w(i) = spaces[i].eigenvalue * Real(spaces[i].basis.cols());
      return RealVectorX<Real>(w / w.sum());
    });
  }

private:
  template <typename WeightFn>
  static ExtremalSpec fromSpaces(const std::vector<Eigenspace<Real>>& spaces, WeightFn weightFn) {
    ExtremalSpec out;
    out.weights = weightFn(spaces);
    for (const auto& s : spaces) out.eigenspaceBases.push_back(s.basis);
    return out;
  }
};

template <typename Real = double>
StateVector<Real> sampleExtremal(const ExtremalSpec<Real>& spec, RngStream& rng) {
  require(!spec.eigenspaceBases.empty() && spec.weights.size() == Index(spec.eigenspaceBases.size()),
          "sampleExtremal: malformed spec");
  require(std::abs(spec.weights.sum() - Real(1)) <= Real(1e-10) && spec.weights.minCoeff() >= Real(0),
          "sampleExtremal: weights must be a probability vector");
  VectorX<Real> psi = VectorX<Real>::Zero(spec.eigenspaceBases.front().rows());
  for (std::size_t i = 0; i < spec.eigenspaceBases.size(); ++i) {
    const auto& basis = spec.eigenspaceBases[i];
    const VectorX<Real> g = complexGaussianVector<Real>(basis.cols(), rng);
    psi += std::sqrt(spec.weights(i)) * (basis * (g / g.norm()));
  }
  return projectToSphere<Real>(psi);
}

template <typename Real = double>
struct OscillatorParams {
  Real mass = Real(1);
  Real omega = Real(1);
  Real hbar = Real(1);
  Index cutoff = 64;

  OscillatorParams() = default;
  OscillatorParams(Real m, Real w, Real h, Index n) : mass(m), omega(w), hbar(h), cutoff(n) { validate(); }

  void validate() const {
    require(mass > Real(0) && omega > Real(0) && hbar > Real(0), "OscillatorParams: m, omega, hbar must be positive");
    require(cutoff >= 2, "OscillatorParams: cutoff must be at least 2");
  }
};

/// hbar omega (n + 1/2) on Fock states n < cutoff.
template <typename Real = double>
HermitianOperator<Real> oscillatorHamiltonian(const OscillatorParams<Real>& params) {
  params.validate();
  RealVectorX<Real> e(params.cutoff);
  for (Index n = 0; n < params.cutoff; ++n) e(n) = params.hbar * params.omega * (Real(n) + Real(0.5));
  return HermitianOperator<Real>::diagonal(e);
}

/// alpha = (m omega q + i p) / sqrt(2 m omega hbar).
template <typename Real = double>
Complex<Real> coherentAmplitude(Real q, Real p, const OscillatorParams<Real>& params) {
  return Complex<Real>(params.mass * params.omega * q, p) /
         std::sqrt(Real(2) * params.mass * params.omega * params.hbar);
}

/// Truncated Fock expansion exp(-|alpha|^2/2) alpha^n / sqrt(n!), renormalized.
template <typename Real = double>
StateVector<Real> coherentState(Real q, Real p, const OscillatorParams<Real>& params,
                                double minTruncatedNorm = 1.0 - 1e-8) {
  params.validate();
  const Complex<Real> alpha = coherentAmplitude(q, p, params);
  const Real n2 = std::norm(alpha);
  if (n2 > Real(params.cutoff) / Real(4))
    throw ContractViolation("coherentState: |alpha|^2 = " + std::to_string(double(n2)) + " exceeds cutoff/4");
  VectorX<Real> c(params.cutoff);
  c(0) = std::exp(-n2 / Real(2));
  for (Index n = 1; n < params.cutoff; ++n) c(n) = c(n - 1) * alpha / std::sqrt(Real(n));
  const Real kept = c.squaredNorm();
  if (kept < Real(minTruncatedNorm)) throw ContractViolation("coherentState: Fock cutoff too small for this state");
  return StateVector<Real>(c / std::sqrt(kept));
}

template <typename Real = double>
struct PhasePoint {
  Real q = Real(0);
  Real p = Real(0);
};

/// beta' = (exp(beta hbar omega) - 1) / (hbar omega).
template <typename Real = double>
Real classicalInverseTemperature(Real beta, const OscillatorParams<Real>& params) {
  const Real x = params.hbar * params.omega;
  return std::expm1(beta * x) / x;
}

/// (q, p) from exp(-beta' H(q, p)) / Z', H = p^2/2m + m omega^2 q^2 / 2.
template <typename Real = double>
PhasePoint<Real> sampleClassicalCanonical(Real beta, const OscillatorParams<Real>& params, RngStream& rng) {
  require(beta > Real(0), "sampleClassicalCanonical: beta must be positive");
  params.validate();
  const Real bp = classicalInverseTemperature(beta, params);
  const Real sq = std::sqrt(Real(1) / (bp * params.mass * params.omega * params.omega));
  const Real sp = std::sqrt(params.mass / bp);
  const Real q = sq * Real(rng.normal());
  const Real p = sp * Real(rng.normal());
  return {q, p};
}

/// Coherent state at a classical canonical phase point (inverse temperature beta').
template <typename Real = double>
StateVector<Real> sampleGuerraLoffredo(Real beta, const OscillatorParams<Real>& params, RngStream& rng) {
  const PhasePoint<Real> x = sampleClassicalCanonical(beta, params, rng);
  return coherentState(x.q, x.p, params);
}

/// -beta <psi|H|psi> / <psi|psi>, relative to the uniform sphere measure, unnormalized.
template <typename Real = double>
Real brodyHughstonLogDensity(const StateVector<Real>& psi, const HermitianOperator<Real>& h, Real beta) {
  require(psi.dim() == h.dim(), "brodyHughstonLogDensity: dimension mismatch");
  const VectorX<Real>& v = psi.vector();
  return -beta * (v.dot(h.matrix() * v)).real() / v.squaredNorm();
}

/// <psi|L|psi>, relative to the uniform sphere measure, unnormalized.
template <typename Real = double>
Real entropyFamilyLogDensity(const StateVector<Real>& psi, const HermitianOperator<Real>& l) {
  require(psi.dim() == l.dim(), "entropyFamilyLogDensity: dimension mismatch");
  return (psi.vector().dot(l.matrix() * psi.vector())).real();
}

struct ChainConfig {
  std::size_t samples = 10000;
  std::size_t burnIn = 2000;
  std::size_t thinning = 5;
  double initialStep = 0.5;
  double targetAcceptance = 0.3;
  bool adapt = true;
};

struct ChainDiagnostics {
  double acceptanceRate = 0.0;
  double finalStep = 0.0;
  /// From the autocorrelation of <psi|H|psi> along the kept draws.
  double effectiveSampleSize = 0.0;
  bool acceptanceWarning = false;
};

/// Draws from one measure together with where they came from.
template <typename Real = double>
struct SampleBatch {
  std::string measure;
  std::uint64_t seed = 0;
  std::uint64_t streamIndex = 0;
  std::vector<StateVector<Real>> samples;
  ChainDiagnostics diagnostics;
};

/// Effective sample size from Geyer's initial positive sequence.
inline double effectiveSampleSize(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return double(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / double(n);
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) return double(n);
  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = (autocov(lag) + autocov(lag + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return double(n) / std::max(tau, 1.0 / double(n));
}

/// Random-walk Metropolis on the unit sphere targeting exp(-beta <psi|H|psi>)
/// against the uniform measure. Proposals add a tangent complex Gaussian step
/// and renormalize; the proposal kernel depends only on the angle between
/// states and is therefore symmetric. The step is adapted toward the target
/// acceptance during burn-in only.
template <typename Real = double>
SampleBatch<Real> sampleBrodyHughston(const HermitianOperator<Real>& h, Real beta, RngStream& rng,
                                      const ChainConfig& config = {}) {
  require(config.samples >= 1 && config.thinning >= 1, "sampleBrodyHughston: samples and thinning must be positive");
  require(config.initialStep > 0.0, "sampleBrodyHughston: step size must be positive");
  const Index d = h.dim();
  const MatrixX<Real>& hm = h.matrix();
  auto energy = [&](const VectorX<Real>& v) { return (v.dot(hm * v)).real(); };

  SampleBatch<Real> batch;
  batch.measure = "brody-hughston";
  batch.seed = rng.seed();
  batch.streamIndex = rng.index();
  batch.samples.reserve(config.samples);

  VectorX<Real> psi = sampleUniformSphere<Real>(d, rng).vector();
  Real e = energy(psi);
  double logStep = std::log(config.initialStep);
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  std::vector<double> trace;
  trace.reserve(config.samples);

  const std::size_t total = config.burnIn + config.samples * config.thinning;
  for (std::size_t it = 0; it < total; ++it) {
    VectorX<Real> xi = complexGaussianVector<Real>(d, rng);
    xi -= psi * Complex<Real>(psi.dot(xi).real(), 0);
    VectorX<Real> candidate = psi + Real(std::exp(logStep)) * xi;
    candidate.normalize();
    const Real ec = energy(candidate);
    const bool accept = std::log(rng.uniformPositive()) < double(-beta * (ec - e));
    if (accept) {
      psi = std::move(candidate);
      e = ec;
    }
    if (it < config.burnIn) {
      if (config.adapt)
        logStep += ((accept ? 1.0 : 0.0) - config.targetAcceptance) / std::sqrt(double(it + 1));
      continue;
    }
    ++proposed;
    if (accept) ++accepted;
    if ((it - config.burnIn + 1) % config.thinning == 0) {
      batch.samples.emplace_back(psi, 1e-10);
      trace.push_back(double(e));
    }
  }
  batch.diagnostics.acceptanceRate = proposed ? double(accepted) / double(proposed) : 0.0;
  batch.diagnostics.finalStep = std::exp(logStep);
  batch.diagnostics.effectiveSampleSize = effectiveSampleSize(trace);
  batch.diagnostics.acceptanceWarning =
      batch.diagnostics.acceptanceRate < 0.1 || batch.diagnostics.acceptanceRate > 0.9;
  return batch;
}

}  // namespace gapsphere

#endif  // GAPSPHERE_ENSEMBLES_HPP
