#ifndef GAPSPHERE_EXPERIMENTS_HPP
#define GAPSPHERE_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapsphere/ensembles.hpp"
#include "gapsphere/gap.hpp"
#include "gapsphere/hilbert.hpp"
#include "gapsphere/stats.hpp"

namespace gapsphere::experiments {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Bad or incomplete configuration (the CLI maps this to exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Names accepted by resolveConfig: sample, density, verify, typicality,
/// heatbath, compare, figure1.
const std::vector<std::string>& experimentNames();

/// Every parameter an experiment reads, with its default value.
json defaultParams(const std::string& experiment);

/// Fully resolved configuration. params holds every parameter, so a report
/// that embeds it can be rerun as is.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  json params;

  json toJson() const;
};

/// Merges user JSON over the defaults. The user document may carry
/// "schema_version", "experiment", "seed" and "params"; unknown parameter
/// names are rejected. The seed comes from the override, else from the
/// document; an experiment that draws random numbers without either is an error.
ExperimentConfig resolveConfig(const std::string& experiment, const json& user,
                               std::optional<std::uint64_t> seedOverride);

/// Reads a JSON file (empty path means no file) and resolves it.
ExperimentConfig loadConfig(const std::string& experiment, const std::string& path,
                            std::optional<std::uint64_t> seedOverride);

/// Density matrix from a JSON description. Kinds: "diagonal" (eigenvalues),
/// "random" (dim; Haar eigenvectors, flat Dirichlet eigenvalues drawn from rng),
/// "thermal" (energies, beta), "matrix" (real and imag row arrays).
DensityMatrix<double> densityFromJson(const json& spec, RngStream& rng);

struct Check {
  std::string name;
  bool pass = true;
  json detail;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<Check> checks;
  json results = json::object();
  bool pass = true;
  double wallTimeSeconds = 0.0;

  void add(Check check);
  /// Wall time is left out unless asked for, so equal inputs give equal bytes.
  json toJson(bool includeWallTime = false) const;
};

/// Worker count: GAPSPHERE_THREADS if set to a positive integer, else the hardware concurrency.
unsigned threadCount();

/// Runs body(i) for i in [0, n) on up to threadCount() threads. Callers write
/// results by index, so the outcome does not depend on scheduling.
void parallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

/// Inverse of the standard normal CDF.
double normalQuantile(double p);

/// Two-sided per-test z threshold that keeps the family-wise false-failure
/// rate of `tests` independent z-tests at familyAlpha (Sidak correction).
double suiteZThreshold(std::size_t tests, double familyAlpha);

/// Upper alpha point of the chi-square distribution (Wilson-Hilferty).
double chiSquareQuantile(int degreesOfFreedom, double alpha);

/// Exact GAP(rho)(f) for a full-rank 2 x 2 rho: s = |<1|psi>|^2 in the
/// eigenbasis has density f(s) of the two-level family and the relative phase
/// is uniform and independent, so the expectation is a 2-D quadrature.
double gapExpectationTwoLevel(const DensityMatrix<double>& rho, const stats::TestFunction& f);

/// GAP(rho)(f) evaluator: exact quadrature for full-rank d = 2, otherwise a
/// Monte Carlo average over `samples` draws made once, up front.
std::function<double(const stats::TestFunction&)> gapReference(const DensityMatrix<double>& rho,
                                                               std::size_t samples, RngStream& rng);

/// Covariance, equivariance, stationarity, phase and heredity batteries for GAP and EIG.
RunReport runPropertySuite(const ExperimentConfig& config);
/// Conditional-wave-function typicality over growing environments.
RunReport runTypicality(const ExperimentConfig& config);
/// Qubit coupled to a bath of incommensurate qubit units in a microcanonical state.
RunReport runHeatBath(const ExperimentConfig& config);
/// GAP against EIG, extremal, Brody-Hughston and Guerra-Loffredo.
RunReport runMeasureComparison(const ExperimentConfig& config);
/// Dispatches verify, typicality, heatbath and compare.
RunReport runExperiment(const ExperimentConfig& config);

/// Draws for the `sample` command.
SampleBatch<double> runSample(const ExperimentConfig& config);
void writeSamplesCsv(std::ostream& out, const SampleBatch<double>& batch);
json samplesJson(const ExperimentConfig& config, const SampleBatch<double>& batch);

/// Density values for the `density` command, one row per (point, measure).
struct DensityRow {
  std::size_t point = 0;
  std::string measure;
  double value = 0.0;
  std::string reference;
  bool outsideSupport = false;
};
std::vector<DensityRow> runDensity(const ExperimentConfig& config);
void writeDensityCsv(std::ostream& out, const std::vector<DensityRow>& rows);
json densityJson(const ExperimentConfig& config, const std::vector<DensityRow>& rows);

/// f(s) table for the `figure1` command; CSV header "delta,s,f".
void writeFigure1Csv(std::ostream& out, const ExperimentConfig& config);
json figure1Json(const ExperimentConfig& config);

}  // namespace gapsphere::experiments

#endif  // GAPSPHERE_EXPERIMENTS_HPP
