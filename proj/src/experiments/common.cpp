#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "gapsphere/ensembles.hpp"
#include "gapsphere/experiments.hpp"
#include "gapsphere/quadrature.hpp"
#include "gapsphere/twolevel.hpp"

namespace gapsphere::experiments {

namespace {

json chainDefaults(std::size_t samples, std::size_t thinning) {
  return json{{"samples", samples},        {"burn_in", 2000},          {"thinning", thinning},
              {"initial_step", 0.5},       {"target_acceptance", 0.3}, {"adapt", true}};
}

json oscillatorDefaults() {
  return json{{"mass", 1.0}, {"omega", 1.0}, {"hbar", 1.0}, {"cutoff", 64}};
}

json buildDefaults(const std::string& name) {
  if (name == "sample")
    return json{{"measure", "gap"},
                {"rho", {{"kind", "random"}, {"dim", 4}}},
                {"samples", 1000},
                {"energies", {0.0, 1.0}},
                {"beta", 1.0},
                {"chain", chainDefaults(1000, 5)},
                {"oscillator", oscillatorDefaults()}};
  if (name == "density")
    return json{{"rho", {{"kind", "random"}, {"dim", 3}}},
                {"measures", {"g", "ga", "gap"}},
                {"points", json::array()},
                {"random_points", 5}};
  if (name == "verify")
    return json{{"cases",
                 {{{"kind", "random"}, {"dim", 2}},
                  {{"kind", "random"}, {"dim", 3}},
                  {{"kind", "random"}, {"dim", 4}},
                  {{"kind", "thermal"}, {"energies", {0.0, 0.4, 1.1, 1.7}}, {"beta", 1.0}}}},
                {"samples", 100000},
                {"measures", {"gap", "eig"}},
                {"sampler", "adjust-and-project"},
                {"stationarity_times", {0.1, 1.0, 10.0}},
                {"heredity", {{"splits", {{2, 2}, {2, 4}, {3, 2}}}, {"samples", 10000}}},
                {"haar_functions", 8},
                {"real_part_functions", 4},
                {"z_threshold", "auto"},
                {"family_alpha", 0.01},
                {"covariance_factor", 5.0}};
  if (name == "typicality")
    return json{{"rho1", {{"kind", "diagonal"}, {"eigenvalues", {0.7, 0.3}}}},
                {"d2", {8, 32, 128}},
                {"n_psi", 200},
                {"epsilon", 0.05},
                {"basis_mode", "fixed"},
                {"haar_functions", 8},
                {"real_part_functions", 4},
                {"reference_samples", 200000},
                {"min_final_fraction", 0.9},
                {"min_median_ratio", 2.0},
                {"controls", true}};
  if (name == "heatbath")
    return json{{"system_gap", 1.0},
                {"bath_sizes", {6, 8, 10}},
                {"jitter", 0.1},
                {"excitation_fraction", 0.35},
                {"window_padding", 0.05},
                {"full_spectrum", false},
                {"mode", "A"},
                {"replicas", 64},
                {"beta_max", 20.0},
                {"max_discrepancy", 0.05},
                {"max_trace_distance", 0.05},
                {"haar_functions", 8},
                {"real_part_functions", 4}};
  if (name == "compare") {
    json osc = oscillatorDefaults();
    osc["beta"] = 1.0;
    osc["samples"] = 20000;
    return json{{"energies", {0.0, 1.0}},
                {"beta", 2.0},
                {"samples", 100000},
                {"chain", chainDefaults(20000, 10)},
                {"bh_min_sigma", 5.0},
                {"covariance_factor", 5.0},
                {"oscillator", osc}};
  }
  if (name == "figure1") return json{{"deltas", twolevel::figure1Deltas()}, {"grid", 201}};
  throw ConfigError("unknown experiment '" + name + "'");
}

// Objects under these keys are replaced as a whole; their shape depends on a "kind".
const std::set<std::string> kFreeForm = {"rho", "rho1"};

void mergeInto(json& target, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("unknown parameter '" + where + "'");
    json& slot = target[it.key()];
    if (slot.is_object() && !kFreeForm.count(it.key()))
      mergeInto(slot, it.value(), where);
    else
      slot = it.value();
  }
}

}  // namespace

const std::vector<std::string>& experimentNames() {
  static const std::vector<std::string> names = {"sample",     "density",  "verify", "typicality",
                                                 "heatbath",   "compare",  "figure1"};
  return names;
}

json defaultParams(const std::string& experiment) { return buildDefaults(experiment); }

json ExperimentConfig::toJson() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["params"] = params;
  return j;
}

ExperimentConfig resolveConfig(const std::string& experiment, const json& user,
                               std::optional<std::uint64_t> seedOverride) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.params = buildDefaults(experiment);
  std::optional<std::uint64_t> seed = seedOverride;
  if (!user.is_null()) {
    if (!user.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (auto it = user.begin(); it != user.end(); ++it) {
      const std::string& key = it.key();
      if (key == "schema_version") {
        if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
          throw ConfigError("config: unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
      } else if (key == "experiment") {
        if (!it->is_string() || it->get<std::string>() != experiment)
          throw ConfigError("config: file is for experiment '" + it->dump() + "', not '" + experiment + "'");
      } else if (key == "seed") {
        if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0))
          throw ConfigError("config: seed must be a nonnegative integer");
        if (!seed) seed = it->get<std::uint64_t>();
      } else if (key == "params") {
        mergeInto(cfg.params, *it, "");
      } else {
        throw ConfigError("config: unknown top-level key '" + key + "'");
      }
    }
  }
  if (experiment != "figure1" && !seed) throw ConfigError("a seed is required: pass --seed or set \"seed\" in the config");
  cfg.seed = seed.value_or(0);
  return cfg;
}

ExperimentConfig loadConfig(const std::string& experiment, const std::string& path,
                            std::optional<std::uint64_t> seedOverride) {
  json user;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
      user = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
  }
  return resolveConfig(experiment, user, seedOverride);
}

DensityMatrix<double> densityFromJson(const json& spec, RngStream& rng) {
  try {
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "diagonal") {
      const auto p = spec.at("eigenvalues").get<std::vector<double>>();
      RealVectorX<double> v(static_cast<Index>(p.size()));
      for (std::size_t i = 0; i < p.size(); ++i) v(Index(i)) = p[i];
      return DensityMatrix<double>::diagonal(v);
    }
    if (kind == "random") {
      const Index d = spec.at("dim").get<Index>();
      requireDimension(d, "random density");
      RealVectorX<double> p(d);
      for (Index i = 0; i < d; ++i) p(i) = rng.exponential(1.0);
      p /= p.sum();
      return DensityMatrix<double>::fromSpectrum(p, haarUnitary<double>(d, rng).matrix());
    }
    if (kind == "thermal") {
      const auto e = spec.at("energies").get<std::vector<double>>();
      RealVectorX<double> v(static_cast<Index>(e.size()));
      for (std::size_t i = 0; i < e.size(); ++i) v(Index(i)) = e[i];
      return canonicalRho(HermitianOperator<double>::diagonal(v), spec.at("beta").get<double>());
    }
    if (kind == "matrix") {
      const auto re = spec.at("real").get<std::vector<std::vector<double>>>();
      const auto im = spec.contains("imag") ? spec.at("imag").get<std::vector<std::vector<double>>>()
                                            : std::vector<std::vector<double>>(re.size(), std::vector<double>(re.size(), 0.0));
      const Index d = static_cast<Index>(re.size());
      MatrixX<double> m(d, d);
      for (Index i = 0; i < d; ++i) {
        if (re[i].size() != re.size() || im.size() != re.size() || im[i].size() != re.size())
          throw ConfigError("rho: matrix must be square");
        for (Index j = 0; j < d; ++j) m(i, j) = std::complex<double>(re[i][j], im[i][j]);
      }
      return DensityMatrix<double>(std::move(m));
    }
    throw ConfigError("rho: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("rho: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("rho: ") + e.what());
  }
}

void RunReport::add(Check check) {
  if (!check.pass) pass = false;
  checks.push_back(std::move(check));
}

json RunReport::toJson(bool includeWallTime) const {
  json j;
  j["config"] = config.toJson();
  j["pass"] = pass;
  json cs = json::array();
  for (const auto& c : checks) cs.push_back(json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["checks"] = std::move(cs);
  j["results"] = results;
  if (includeWallTime) j["wall_time_seconds"] = wallTimeSeconds;
  return j;
}

unsigned threadCount() {
  if (const char* env = std::getenv("GAPSPHERE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallelFor(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(threadCount(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  // Rethrow the error of the lowest index so failures are reproducible too.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double normalQuantile(double p) {
  require(p > 0.0 && p < 1.0, "normalQuantile: p must lie in (0, 1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double suiteZThreshold(std::size_t tests, double familyAlpha) {
  require(tests >= 1 && familyAlpha > 0.0 && familyAlpha < 1.0, "suiteZThreshold: bad arguments");
  const double perTest = -std::expm1(std::log1p(-familyAlpha) / double(tests));
  return normalQuantile(1.0 - perTest / 2.0);
}

double chiSquareQuantile(int k, double alpha) {
  require(k >= 1 && alpha > 0.0 && alpha < 1.0, "chiSquareQuantile: bad arguments");
  const double z = normalQuantile(1.0 - alpha);
  const double h = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - h + z * std::sqrt(h), 3);
}

double gapExpectationTwoLevel(const DensityMatrix<double>& rho, const stats::TestFunction& f) {
  require(rho.dim() == 2, "gapExpectationTwoLevel: rho must be 2 x 2");
  const auto eig = spectral(rho);
  const double p0 = eig.eigenvalues(0), p1 = eig.eigenvalues(1);
  require(p0 > tolerances::rank && p1 > tolerances::rank, "gapExpectationTwoLevel: rho must have full rank");
  const auto spec = twolevel::TwoLevelSpec<double>::fromDelta(p0 / p1);
  const MatrixX<double>& v = eig.eigenvectors;
  // s = sin^2 u keeps the integrand smooth at both ends; ds = sin 2u du.
  // The phase integrand is a trigonometric polynomial of low degree, for
  // which the equally spaced rule below is exact.
  const int phases = 16;
  auto inner = [&](double u) {
    const double s = std::sin(u) * std::sin(u);
    const double a = std::sin(u), b = std::cos(u);
    double acc = 0.0;
    for (int j = 0; j < phases; ++j) {
      const double theta = 2.0 * std::numbers::pi * j / phases;
      VectorX<double> c(2);
      c << std::polar(a, theta), std::complex<double>(b, 0.0);
      acc += f(VectorX<double>(v * c));
    }
    return acc / phases * twolevel::fDensityClosed(s, spec) * std::sin(2.0 * u);
  };
  return integrate<double>(inner, 0.0, std::numbers::pi / 2.0, 8, 24);
}

std::function<double(const stats::TestFunction&)> gapReference(const DensityMatrix<double>& rho,
                                                               std::size_t samples, RngStream& rng) {
  if (rho.dim() == 2) {
    const auto eig = spectral(rho);
    if (eig.eigenvalues.minCoeff() > tolerances::rank)
      return [rho](const stats::TestFunction& f) { return gapExpectationTwoLevel(rho, f); };
  }
  require(samples >= 1, "gapReference: Monte Carlo reference needs samples");
  const GapSpec<double> spec(rho);
  auto draws = std::make_shared<std::vector<StateVector<double>>>();
  draws->reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) draws->push_back(sampleGAP(spec, rng));
  return [draws](const stats::TestFunction& f) {
    double sum = 0.0;
    for (const auto& s : *draws) sum += f(s);
    return sum / double(draws->size());
  };
}

RunReport runExperiment(const ExperimentConfig& config) {
  if (config.experiment == "verify") return runPropertySuite(config);
  if (config.experiment == "typicality") return runTypicality(config);
  if (config.experiment == "heatbath") return runHeatBath(config);
  if (config.experiment == "compare") return runMeasureComparison(config);
  throw ConfigError("experiment '" + config.experiment + "' does not produce a report");
}

}  // namespace gapsphere::experiments
