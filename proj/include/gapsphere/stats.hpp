#ifndef GAPSPHERE_STATS_HPP
#define GAPSPHERE_STATS_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapsphere/gap.hpp"
#include "gapsphere/hilbert.hpp"

namespace gapsphere::stats {

using State = StateVector<double>;
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// sum_i w_i |psi_i><psi_i| / sum_i w_i |psi_i|^2 (unit trace, Hermitian).
DensityMatrix<double> empiricalCovariance(std::span<const State> samples);
DensityMatrix<double> empiricalCovariance(std::span<const WeightedSample<double>> samples);

/// 1/2 sum |eigenvalues(rho - sigma)|.
double traceDistance(const Matrix& rho, const Matrix& sigma);
double traceDistance(const DensityMatrix<double>& rho, const DensityMatrix<double>& sigma);

/// 5 d / sqrt(N): the covariance tolerance used throughout the invariant suites.
double covarianceTolerance(Index d, std::size_t n);

/// Bounded function on the unit sphere.
struct TestFunction {
  enum class Kind { Marginal, Polynomial, RealPart };
  Kind kind = Kind::Marginal;
  Vector phi;
  Vector phiPrime;
  int power = 1;
  std::string label;

  /// |<phi|psi>|^2
  static TestFunction marginal(Vector phi, std::string label);
  /// |<phi|psi>|^{2r}
  static TestFunction polynomial(Vector phi, int r, std::string label);
  /// Re <phi|psi><psi|phi'>
  static TestFunction realPart(Vector phi, Vector phiPrime, std::string label);

  double operator()(const Vector& psi) const;
  double operator()(const State& psi) const { return (*this)(psi.vector()); }
};

/// Marginals |<phi|psi>|^{2r}, r = 1, 2, 3, for every column of `eigenbasis`
/// and `haarCount` uniform random phi, plus `realPartCount` real parts
/// Re <phi|psi><psi|phi'> over pairs of further uniform random vectors.
std::vector<TestFunction> defaultDictionary(const Matrix& eigenbasis, RngStream& rng, int haarCount = 8,
                                            int realPartCount = 4);

/// U-transformed dictionary: f_U(psi) = f(U* psi), so that f_U(U psi) = f(psi).
std::vector<TestFunction> transformDictionary(const std::vector<TestFunction>& functions, const Matrix& u);

struct DiscrepancyEntry {
  std::string label;
  double estimateA = 0.0;
  double estimateB = 0.0;
  double standardError = 0.0;
  double z = 0.0;
  std::optional<double> pValue;
  bool excluded = false;
  bool pass = true;
  std::string note;
};

struct DiscrepancyReport {
  std::string name;
  double zThreshold = 3.0;
  double alpha = 0.01;
  std::vector<DiscrepancyEntry> entries;
  std::vector<std::string> notes;
  bool pass = true;

  double maxAbsZ() const;
  /// Recomputes pass from the entries.
  void finalize();
};

nlohmann::ordered_json toJson(const DiscrepancyEntry& entry);
nlohmann::ordered_json toJson(const DiscrepancyReport& report);

/// Self-normalized weighted mean and its delta-method standard error.
struct MeanEstimate {
  double mean = 0.0;
  double standardError = 0.0;
};
MeanEstimate weightedMean(std::span<const double> values, std::span<const double> weights = {});

/// Weighted collection of unit vectors; empty weights mean all ones.
struct SampleView {
  std::span<const State> states;
  std::span<const double> weights = {};
};

inline constexpr std::size_t kMinDiscrepancySamples = 1000;

/// Per-function difference of means with pooled standard error.
DiscrepancyReport discrepancy(SampleView a, SampleView b, const std::vector<TestFunction>& functions,
                              double zThreshold = 3.0);

/// Against an exact reference value mu(f) supplied per function.
DiscrepancyReport discrepancy(SampleView a, const std::function<double(const TestFunction&)>& reference,
                              const std::vector<TestFunction>& functions, double zThreshold = 3.0);

struct KsResult {
  double statistic = 0.0;
  double pValue = 1.0;
  std::size_t n = 0;
};

inline constexpr std::size_t kMinKsSamples = 100;

/// Asymptotic Kolmogorov tail probability Q_KS(lambda).
double kolmogorovQ(double lambda);
/// Asymptotic Kuiper tail probability Q_KP(lambda).
double kuiperQ(double lambda);

/// Two-sided one-sample KS with the asymptotic p-value.
KsResult ksTest(std::span<const double> samples, const std::function<double(double)>& cdf);
/// Two-sample KS.
KsResult ksTest(std::span<const double> a, std::span<const double> b);

/// Uniformity of angles on the circle: the KS statistic maximized over a grid
/// of 64 origins, which approximates the rotation-invariant Kuiper statistic
/// from below; the p-value uses Kuiper's distribution.
KsResult circularUniformityTest(std::span<const double> angles, int originGrid = 64);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Phases arg <n|psi> uniform on the circle and uncorrelated with the moduli
/// and with each other. KS entries use alpha; correlation entries report
/// z = corr sqrt(N) against corrThreshold (|corr| <= 4 / sqrt(N) by default).
DiscrepancyReport phaseUniformity(std::span<const State> samples, const Matrix& eigenbasis, double alpha = 0.01,
                                  double corrThreshold = 4.0);

/// Evolves every draw by exp(-i H t) (hbar = 1) and compares each time slice
/// with the t = 0 draws through paired differences f(U psi) - f(psi). If rho
/// is given and [H, rho] != 0, a note is added.
DiscrepancyReport stationarityCheck(std::span<const State> samples, const HermitianOperator<double>& h,
                                    const std::vector<double>& times, const std::vector<TestFunction>& functions,
                                    const DensityMatrix<double>* rho = nullptr, double zThreshold = 3.0);

/// exp(-i H t) from the spectral decomposition of H.
Matrix evolutionOperator(const SpectralDecomposition<double>& h, double t);

/// Values of f over a sample.
std::vector<double> evaluate(const TestFunction& f, std::span<const State> samples);

}  // namespace gapsphere::stats

#endif  // GAPSPHERE_STATS_HPP
