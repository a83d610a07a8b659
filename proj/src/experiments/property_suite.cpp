#include <cmath>
#include <functional>
#include <memory>

#include "gapsphere/ensembles.hpp"
#include "gapsphere/experiments.hpp"
#include "gapsphere/subsystem.hpp"

namespace gapsphere::experiments {

namespace {

using State = StateVector<double>;
using Sampler = std::function<State(RngStream&)>;

Sampler makeSampler(const std::string& measure, const DensityMatrix<double>& rho, bool plainProjection) {
  if (measure == "gap") {
    auto spec = std::make_shared<GapSpec<double>>(rho);
    if (plainProjection) return [spec](RngStream& rng) { return sampleProjectedGaussian(*spec, rng); };
    return [spec](RngStream& rng) { return sampleGAP(*spec, rng); };
  }
  if (measure == "eig") {
    auto eig = std::make_shared<EigSampler<double>>(rho);
    return [eig](RngStream& rng) { return (*eig)(rng); };
  }
  throw ConfigError("verify: unknown measure '" + measure + "' (expected gap or eig)");
}

std::vector<State> drawMany(const Sampler& sampler, std::size_t n, RngStream rng) {
  std::vector<State> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sampler(rng));
  return out;
}

// Energies whose Gibbs state at beta = 1 is rho; empty directions get a large energy.
HermitianOperator<double> modularHamiltonian(const DensityMatrix<double>& rho) {
  const auto eig = spectral(rho);
  RealVectorX<double> e(eig.dim());
  for (Index n = 0; n < eig.dim(); ++n) e(n) = eig.eigenvalues(n) > 1e-300 ? -std::log(eig.eigenvalues(n)) : 700.0;
  MatrixX<double> h = eig.eigenvectors * e.cast<std::complex<double>>().asDiagonal() * eig.eigenvectors.adjoint();
  h = (h + h.adjoint().eval()) / 2.0;
  return HermitianOperator<double>(std::move(h));
}

// One named check. Its statistical reports get their thresholds only after
// every battery has run, since the per-test threshold depends on the count.
struct Battery {
  std::string name;
  std::vector<stats::DiscrepancyReport> reports;
  bool deterministicPass = true;
  json detail = json::object();
};

bool isZEntry(const stats::DiscrepancyEntry& e) {
  return !e.excluded && !e.pValue && e.standardError >= 1e-14;
}

void applyThresholds(stats::DiscrepancyReport& r, double z, double alpha) {
  r.zThreshold = z;
  r.alpha = alpha;
  for (auto& e : r.entries) {
    if (e.excluded) continue;
    if (e.pValue)
      e.pass = *e.pValue >= alpha;
    else if (isZEntry(e))
      e.pass = std::abs(e.z) <= z;
  }
  r.finalize();
}

json failingEntries(const stats::DiscrepancyReport& r) {
  json out = json::array();
  for (const auto& e : r.entries)
    if (!e.excluded && !e.pass) out.push_back(stats::toJson(e));
  return out;
}

// z-test of every real and imaginary part of E[psi psi*] against rho. Much
// sharper than the trace-distance tolerance, whose 5 d / sqrt(N) scale lets
// biases of a few percent through.
stats::DiscrepancyReport covarianceElements(const std::vector<State>& draws, const DensityMatrix<double>& rho) {
  stats::DiscrepancyReport r;
  r.name = "covariance elements";
  const Index d = rho.dim();
  std::vector<double> x(draws.size());
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (int part = 0; part < (i == j ? 1 : 2); ++part) {
        for (std::size_t k = 0; k < draws.size(); ++k) {
          const auto v = draws[k](i) * std::conj(draws[k](j));
          x[k] = part == 0 ? v.real() : v.imag();
        }
        const auto m = stats::weightedMean(x);
        stats::DiscrepancyEntry e;
        e.label = std::string(part == 0 ? "Re" : "Im") + " rho(" + std::to_string(i) + "," + std::to_string(j) + ")";
        e.estimateA = m.mean;
        e.estimateB = part == 0 ? rho.matrix()(i, j).real() : rho.matrix()(i, j).imag();
        e.standardError = m.standardError;
        if (m.standardError < 1e-14) {
          e.excluded = true;
          e.note = "zero-variance";
        } else {
          e.z = (e.estimateA - e.estimateB) / e.standardError;
        }
        r.entries.push_back(std::move(e));
      }
  r.finalize();
  return r;
}

std::vector<double> numbers(const json& j) { return j.get<std::vector<double>>(); }

}  // namespace

RunReport runPropertySuite(const ExperimentConfig& config) {
  const json& p = config.params;
  RunReport report;
  report.config = config;
  const std::uint64_t seed = config.seed;

  std::size_t n, heredityN;
  std::string samplerName, zMode;
  std::vector<std::string> measures;
  std::vector<double> times;
  std::vector<std::pair<Index, Index>> splits;
  int haar, realPart;
  double familyAlpha, covFactor, fixedZ = 0.0;
  try {
    n = p.at("samples").get<std::size_t>();
    measures = p.at("measures").get<std::vector<std::string>>();
    samplerName = p.at("sampler").get<std::string>();
    times = numbers(p.at("stationarity_times"));
    for (const auto& s : p.at("heredity").at("splits")) splits.emplace_back(s.at(0).get<Index>(), s.at(1).get<Index>());
    heredityN = p.at("heredity").at("samples").get<std::size_t>();
    haar = p.at("haar_functions").get<int>();
    realPart = p.at("real_part_functions").get<int>();
    familyAlpha = p.at("family_alpha").get<double>();
    covFactor = p.at("covariance_factor").get<double>();
    const json& zt = p.at("z_threshold");
    if (zt.is_string()) {
      zMode = zt.get<std::string>();
      if (zMode != "auto") throw ConfigError("verify: z_threshold must be \"auto\" or a number");
    } else {
      zMode = "fixed";
      fixedZ = zt.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("verify: ") + e.what());
  }
  if (samplerName != "adjust-and-project" && samplerName != "plain-projection")
    throw ConfigError("verify: sampler must be adjust-and-project or plain-projection");
  if (n < stats::kMinDiscrepancySamples || heredityN < stats::kMinDiscrepancySamples)
    throw ConfigError("verify: samples and heredity.samples must be at least " +
                      std::to_string(stats::kMinDiscrepancySamples));
  if (!(familyAlpha > 0.0 && familyAlpha < 1.0)) throw ConfigError("verify: family_alpha must lie in (0, 1)");
  const bool plain = samplerName == "plain-projection";

  std::vector<DensityMatrix<double>> cases;
  for (std::size_t c = 0; c < p.at("cases").size(); ++c) {
    RngStream rng(seed, 100 + c);
    cases.push_back(densityFromJson(p.at("cases")[c], rng));
  }
  for (const auto& m : measures) makeSampler(m, cases.front(), plain);  // validates the names early

  // Batteries are laid out by index so the parallel loop writes disjoint slots.
  const std::size_t caseTasks = cases.size() * measures.size();
  const std::size_t tasks = caseTasks + splits.size();
  std::vector<std::vector<Battery>> out(tasks);

  parallelFor(tasks, [&](std::size_t t) {
    if (t < caseTasks) {
      const std::size_t c = t / measures.size(), mi = t % measures.size();
      const std::string& m = measures[mi];
      const DensityMatrix<double>& rho = cases[c];
      const Index d = rho.dim();
      const std::uint64_t base = 1'000'000ULL * (c + 1) + 1000ULL * mi;
      const std::string tag = m + " case" + std::to_string(c) + " (d=" + std::to_string(d) + ")";
      const auto eig = spectral(rho);
      RngStream dictRng(seed, base + 4);
      const auto dict = stats::defaultDictionary(eig.eigenvectors, dictRng, haar, realPart);

      const Sampler sampler = makeSampler(m, rho, plain);
      const auto draws = drawMany(sampler, n, RngStream(seed, base));

      Battery cov;
      cov.name = "covariance " + tag;
      const double td = stats::traceDistance(stats::empiricalCovariance(draws), rho);
      const double tol = covFactor * double(d) / std::sqrt(double(n));
      cov.deterministicPass = td <= tol;
      cov.detail = json{{"trace_distance", td}, {"tolerance", tol}};
      cov.reports.push_back(covarianceElements(draws, rho));

      Battery eqv;
      eqv.name = "equivariance " + tag;
      RngStream uRng(seed, base + 1);
      const MatrixX<double> u = haarUnitary<double>(d, uRng).matrix();
      MatrixX<double> rotated = u * rho.matrix() * u.adjoint();
      rotated = (rotated + rotated.adjoint().eval()) / 2.0;
      const DensityMatrix<double> rhoU(Unchecked{}, std::move(rotated));
      const auto direct = drawMany(makeSampler(m, rhoU, plain), n, RngStream(seed, base + 2));
      auto moved = drawMany(sampler, n, RngStream(seed, base + 3));
      for (auto& s : moved) s = State(VectorX<double>(u * s.vector()), 1e-10);
      eqv.reports.push_back(stats::discrepancy({direct}, {moved}, stats::transformDictionary(dict, u), 3.0));
      eqv.reports.back().name = "equivariance";

      Battery sta;
      sta.name = "stationarity " + tag;
      sta.reports.push_back(stats::stationarityCheck(draws, modularHamiltonian(rho), times, dict, &rho, 3.0));
      sta.reports.back().name = "stationarity";

      out[t] = {std::move(cov), std::move(eqv), std::move(sta)};
      if (m == "gap") {
        Battery ph;
      ph.name = "phase uniformity " + tag;
        ph.reports.push_back(stats::phaseUniformity(draws, eig.eigenvectors));
        ph.reports.back().name = "phase";
        out[t].push_back(std::move(ph));
      }
      return;
    }

    const std::size_t s = t - caseTasks;
    const auto [d1, d2] = splits[s];
    const BipartiteSplit split(d1, d2);
    const std::uint64_t base = 50'000'000ULL + 1000ULL * s;
    RngStream setup(seed, base);
    const DensityMatrix<double> rho1 = densityFromJson(json{{"kind", "random"}, {"dim", d1}}, setup);
    const DensityMatrix<double> rho2 = densityFromJson(json{{"kind", "random"}, {"dim", d2}}, setup);
    const DensityMatrix<double> joint(Unchecked{}, kron<double>(rho1.matrix(), rho2.matrix()));
    const std::string tag = std::to_string(d1) + "x" + std::to_string(d2);
    const auto eig1 = spectral(rho1);
    RngStream dictRng(seed, base + 4);
    const auto dict = stats::defaultDictionary(eig1.eigenvectors, dictRng, haar, realPart);

    auto conditionals = [&](const Sampler& sampler, RngStream rng) {
      std::vector<State> psi1;
      psi1.reserve(heredityN);
      for (std::size_t i = 0; i < heredityN; ++i) {
        const State psi = sampler(rng);
        psi1.push_back(conditionalDraw(psi, haarUnitary<double>(d2, rng), split, rng).psi1);
      }
      return psi1;
    };

    std::vector<Battery> list;
    for (const auto& m : measures) {
      if (m == "gap") {
        Battery b;
      b.name = "heredity gap " + tag;
        const auto cond = conditionals(makeSampler("gap", joint, plain), RngStream(seed, base + 1));
        const auto direct = drawMany(makeSampler("gap", rho1, false), heredityN, RngStream(seed, base + 2));
        b.reports.push_back(stats::discrepancy({cond}, {direct}, dict, 3.0));
        b.reports.back().name = "heredity";
        list.push_back(std::move(b));
      } else {
        // EIG conditionals are eigenvectors of rho1 with frequencies p_n.
        Battery b;
      b.name = "heredity eig " + tag;
        const auto cond = conditionals(makeSampler("eig", joint, false), RngStream(seed, base + 3));
        std::vector<std::size_t> counts(std::size_t(d1), 0);
        double worstOverlap = 1.0;
        for (const auto& s1 : cond) {
          const RealVectorX<double> ov = (eig1.eigenvectors.adjoint() * s1.vector()).cwiseAbs2();
          Index best = 0;
          worstOverlap = std::min(worstOverlap, ov.maxCoeff(&best));
          ++counts[std::size_t(best)];
        }
        stats::DiscrepancyReport r;
        r.name = "heredity";
        for (Index k = 0; k < d1; ++k) {
          const double pk = eig1.eigenvalues(k);
          stats::DiscrepancyEntry e;
          e.label = "frequency of eigenvector " + std::to_string(k);
          e.estimateA = double(counts[std::size_t(k)]) / double(heredityN);
          e.estimateB = pk;
          e.standardError = std::sqrt(pk * (1.0 - pk) / double(heredityN));
          if (e.standardError < 1e-14) {
            e.excluded = true;
            e.note = "zero-variance";
          } else {
            e.z = (e.estimateA - e.estimateB) / e.standardError;
          }
          r.entries.push_back(std::move(e));
        }
        r.finalize();
        b.reports.push_back(std::move(r));
        b.deterministicPass = worstOverlap >= 1.0 - 1e-8;
        b.detail = json{{"min_eigenvector_overlap", worstOverlap}};
        list.push_back(std::move(b));
      }
    }
    out[t] = std::move(list);
  });

  std::size_t tests = 0;
  for (const auto& bs : out)
    for (const auto& b : bs)
      for (const auto& r : b.reports)
        for (const auto& e : r.entries)
          if (e.pValue || isZEntry(e)) ++tests;
  double z = fixedZ, alpha;
  if (zMode == "auto") {
    z = suiteZThreshold(std::max<std::size_t>(tests, 1), familyAlpha);
    alpha = 2.0 * (1.0 - 0.5 * std::erfc(-z / std::sqrt(2.0)));
  } else {
    alpha = std::erfc(z / std::sqrt(2.0));
  }

  json batteries = json::array();
  for (auto& bs : out)
    for (auto& b : bs) {
      bool pass = b.deterministicPass;
      json reports = json::array();
      for (auto& r : b.reports) {
        applyThresholds(r, z, alpha);
        pass = pass && r.pass;
        reports.push_back(json{{"name", r.name},
                               {"pass", r.pass},
                               {"entries", r.entries.size()},
                               {"max_abs_z", r.maxAbsZ()},
                               {"notes", r.notes},
                               {"failures", failingEntries(r)}});
      }
      json detail = b.detail;
      if (!reports.empty()) detail["reports"] = reports;
      batteries.push_back(json{{"name", b.name}, {"pass", pass}});
      report.add(Check{b.name, pass, std::move(detail)});
    }
  report.results = json{{"sampler", samplerName},
                        {"statistical_tests", tests},
                        {"z_threshold", z},
                        {"per_test_alpha", alpha},
                        {"family_alpha", familyAlpha},
                        {"batteries", batteries}};
  return report;
}

}  // namespace gapsphere::experiments
