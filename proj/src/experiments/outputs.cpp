#include <iomanip>
#include <ostream>

#include "gapsphere/ensembles.hpp"
#include "gapsphere/experiments.hpp"
#include "gapsphere/twolevel.hpp"

namespace gapsphere::experiments {

namespace {

using State = StateVector<double>;

struct PrecisionGuard {
  std::ostream& out;
  std::ios::fmtflags flags;
  std::streamsize precision;
  explicit PrecisionGuard(std::ostream& o) : out(o), flags(o.flags()), precision(o.precision()) {
    out << std::setprecision(17);
  }
  ~PrecisionGuard() {
    out.flags(flags);
    out.precision(precision);
  }
};

json vectorJson(const VectorX<double>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) {
    a.push_back(v(i).real());
    a.push_back(v(i).imag());
  }
  return a;
}

}  // namespace

SampleBatch<double> runSample(const ExperimentConfig& config) {
  const json& p = config.params;
  std::string measure;
  std::size_t n;
  try {
    measure = p.at("measure").get<std::string>();
    n = p.at("samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  if (n < 1) throw ConfigError("sample: samples must be positive");
  RngStream setup(config.seed, 1);
  RngStream rng(config.seed, 2);

  auto energies = [&] {
    const auto e = p.at("energies").get<std::vector<double>>();
    RealVectorX<double> v(Index(e.size()));
    for (std::size_t i = 0; i < e.size(); ++i) v(Index(i)) = e[i];
    return HermitianOperator<double>::diagonal(v);
  };

  SampleBatch<double> batch;
  batch.measure = measure;
  batch.seed = config.seed;
  batch.streamIndex = rng.index();
  try {
    if (measure == "brody-hughston") {
      ChainConfig c;
      const json& j = p.at("chain");
      c.samples = n;
      c.burnIn = j.at("burn_in").get<std::size_t>();
      c.thinning = j.at("thinning").get<std::size_t>();
      c.initialStep = j.at("initial_step").get<double>();
      c.targetAcceptance = j.at("target_acceptance").get<double>();
      c.adapt = j.at("adapt").get<bool>();
      return sampleBrodyHughston(energies(), p.at("beta").get<double>(), rng, c);
    }
    if (measure == "guerra-loffredo") {
      const json& o = p.at("oscillator");
      const OscillatorParams<double> osc(o.at("mass").get<double>(), o.at("omega").get<double>(),
                                         o.at("hbar").get<double>(), o.at("cutoff").get<Index>());
      const double beta = p.at("beta").get<double>();
      for (std::size_t i = 0; i < n; ++i) batch.samples.push_back(sampleGuerraLoffredo(beta, osc, rng));
      return batch;
    }
    if (measure == "extremal-thermal") {
      const auto spec = ExtremalSpec<double>::thermal(energies(), p.at("beta").get<double>());
      for (std::size_t i = 0; i < n; ++i) batch.samples.push_back(sampleExtremal(spec, rng));
      return batch;
    }
    const DensityMatrix<double> rho = densityFromJson(p.at("rho"), setup);
    if (measure == "gap" || measure == "projected-gaussian") {
      const GapSpec<double> spec(rho);
      for (std::size_t i = 0; i < n; ++i)
        batch.samples.push_back(measure == "gap" ? sampleGAP(spec, rng) : sampleProjectedGaussian(spec, rng));
    } else if (measure == "eig") {
      const EigSampler<double> eig(rho);
      for (std::size_t i = 0; i < n; ++i) batch.samples.push_back(eig(rng));
    } else if (measure == "extremal") {
      const auto spec = ExtremalSpec<double>::fromDensity(rho);
      for (std::size_t i = 0; i < n; ++i) batch.samples.push_back(sampleExtremal(spec, rng));
    } else if (measure == "uniform") {
      for (std::size_t i = 0; i < n; ++i) batch.samples.push_back(sampleUniformSphere<double>(rho.dim(), rng));
    } else {
      throw ConfigError("sample: unknown measure '" + measure +
                        "' (gap, projected-gaussian, eig, extremal, extremal-thermal, uniform, brody-hughston, "
                        "guerra-loffredo)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  return batch;
}

void writeSamplesCsv(std::ostream& out, const SampleBatch<double>& batch) {
  PrecisionGuard guard(out);
  const Index d = batch.samples.empty() ? 0 : batch.samples.front().dim();
  for (Index i = 0; i < d; ++i) out << (i ? "," : "") << "re_" << i << ",im_" << i;
  out << '\n';
  for (const auto& s : batch.samples) {
    for (Index i = 0; i < d; ++i) out << (i ? "," : "") << s(i).real() << ',' << s(i).imag();
    out << '\n';
  }
}

json samplesJson(const ExperimentConfig& config, const SampleBatch<double>& batch) {
  json j;
  j["config"] = config.toJson();
  j["measure"] = batch.measure;
  j["count"] = batch.samples.size();
  if (batch.measure == "brody-hughston")
    j["diagnostics"] = json{{"acceptance_rate", batch.diagnostics.acceptanceRate},
                            {"final_step", batch.diagnostics.finalStep},
                            {"effective_sample_size", batch.diagnostics.effectiveSampleSize},
                            {"acceptance_warning", batch.diagnostics.acceptanceWarning}};
  json rows = json::array();
  for (const auto& s : batch.samples) rows.push_back(vectorJson(s.vector()));
  j["samples"] = std::move(rows);
  return j;
}

std::vector<DensityRow> runDensity(const ExperimentConfig& config) {
  const json& p = config.params;
  std::vector<DensityRow> rows;
  try {
    RngStream setup(config.seed, 1);
    const DensityMatrix<double> rho = densityFromJson(p.at("rho"), setup);
    const GapSpec<double> spec(rho);
    const Index d = rho.dim();
    std::vector<VectorX<double>> points;
    for (const auto& pt : p.at("points")) {
      const auto xs = pt.get<std::vector<double>>();
      if (xs.size() != std::size_t(2 * d)) throw ConfigError("density: each point needs 2 d numbers (re, im pairs)");
      VectorX<double> v(d);
      for (Index i = 0; i < d; ++i) v(i) = {xs[std::size_t(2 * i)], xs[std::size_t(2 * i + 1)]};
      points.push_back(v);
    }
    RngStream rng(config.seed, 2);
    const auto extra = p.at("random_points").get<std::size_t>();
    for (std::size_t i = 0; i < extra; ++i) points.push_back(sampleUniformSphere<double>(d, rng).vector());
    if (points.empty()) throw ConfigError("density: no points (set points or random_points)");

    for (const auto& m : p.at("measures").get<std::vector<std::string>>())
      if (m != "g" && m != "ga" && m != "gap") throw ConfigError("density: unknown measure '" + m + "' (g, ga, gap)");
    for (std::size_t i = 0; i < points.size(); ++i)
      for (const auto& m : p.at("measures").get<std::vector<std::string>>()) {
        DensityValue<double> v;
        if (m == "g")
          v = densityG(spec, points[i]);
        else if (m == "ga")
          v = densityGA(spec, points[i]);
        else
          v = densityGAP(spec, projectToSphere<double>(points[i]));
        rows.push_back({i, m, v.value, toString(v.reference), v.outsideSupport});
      }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("density: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("density: ") + e.what());
  }
  return rows;
}

void writeDensityCsv(std::ostream& out, const std::vector<DensityRow>& rows) {
  PrecisionGuard guard(out);
  out << "point,measure,value,reference,outside_support\n";
  for (const auto& r : rows)
    out << r.point << ',' << r.measure << ',' << r.value << ',' << r.reference << ',' << (r.outsideSupport ? 1 : 0)
        << '\n';
}

json densityJson(const ExperimentConfig& config, const std::vector<DensityRow>& rows) {
  json j;
  j["config"] = config.toJson();
  json a = json::array();
  for (const auto& r : rows)
    a.push_back(json{{"point", r.point},
                     {"measure", r.measure},
                     {"value", r.value},
                     {"reference", r.reference},
                     {"outside_support", r.outsideSupport}});
  j["rows"] = std::move(a);
  return j;
}

namespace {
std::vector<twolevel::Figure1Row<double>> figureRows(const ExperimentConfig& config) {
  try {
    const auto deltas = config.params.at("deltas").get<std::vector<double>>();
    const auto grid = config.params.at("grid").get<Index>();
    if (grid < 2) throw ConfigError("figure1: grid needs at least 2 points");
    for (double x : deltas)
      if (!(x > 0.0)) throw ConfigError("figure1: deltas must be positive");
    return twolevel::figure1Data<double>(deltas, grid);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("figure1: ") + e.what());
  }
}
}  // namespace

void writeFigure1Csv(std::ostream& out, const ExperimentConfig& config) {
  const auto rows = figureRows(config);
  PrecisionGuard guard(out);
  out << "delta,s,f\n";
  for (const auto& r : rows) out << r.delta << ',' << r.s << ',' << r.f << '\n';
}

json figure1Json(const ExperimentConfig& config) {
  json j;
  j["config"] = config.toJson();
  json a = json::array();
  for (const auto& r : figureRows(config)) a.push_back(json{{"delta", r.delta}, {"s", r.s}, {"f", r.f}});
  j["rows"] = std::move(a);
  return j;
}

}  // namespace gapsphere::experiments
