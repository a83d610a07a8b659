#include <algorithm>
#include <cmath>

#include "gapsphere/ensembles.hpp"
#include "gapsphere/experiments.hpp"

namespace gapsphere::experiments {

namespace {

using State = StateVector<double>;

ChainConfig chainFromJson(const json& j) {
  ChainConfig c;
  c.samples = j.at("samples").get<std::size_t>();
  c.burnIn = j.at("burn_in").get<std::size_t>();
  c.thinning = j.at("thinning").get<std::size_t>();
  c.initialStep = j.at("initial_step").get<double>();
  c.targetAcceptance = j.at("target_acceptance").get<double>();
  c.adapt = j.at("adapt").get<bool>();
  return c;
}

struct Summary {
  double traceDistance = 0.0;
  double meanRayDistance = 0.0;
  double moduliSpread = 0.0;  // largest range max - min of |Z_n|^2
  std::vector<double> diagonalZ;  // (mean |Z_n|^2 - rho_nn) / SE, SE from the effective sample size
};

Summary summarize(const std::vector<State>& draws, const DensityMatrix<double>& rho, bool correlated) {
  Summary s;
  s.traceDistance = stats::traceDistance(stats::empiricalCovariance(draws), rho);
  double ray = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i + 1 < draws.size(); i += 2, ++pairs)
    ray += std::sqrt(std::max(0.0, 1.0 - std::norm(draws[i].vector().dot(draws[i + 1].vector()))));
  s.meanRayDistance = pairs ? ray / double(pairs) : 0.0;
  for (Index n = 0; n < rho.dim(); ++n) {
    std::vector<double> x;
    x.reserve(draws.size());
    for (const auto& d : draws) x.push_back(std::norm(d(n)));
    const auto m = stats::weightedMean(x);
    const double sd = m.standardError * std::sqrt(double(x.size()));
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    s.moduliSpread = std::max(s.moduliSpread, *hi - *lo);
    const double ess = correlated ? effectiveSampleSize(x) : double(x.size());
    const double se = sd / std::sqrt(std::max(ess, 1.0));
    const double target = rho.matrix()(n, n).real();
    s.diagonalZ.push_back(se > 1e-14 ? (m.mean - target) / se : 0.0);
  }
  return s;
}

double maxAbs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

json summaryJson(const Summary& s) {
  return json{{"trace_distance", s.traceDistance},
              {"mean_ray_distance", s.meanRayDistance},
              {"moduli_spread", s.moduliSpread},
              {"max_abs_diagonal_z", maxAbs(s.diagonalZ)}};
}

}  // namespace

RunReport runMeasureComparison(const ExperimentConfig& config) {
  const json& p = config.params;
  RunReport report;
  report.config = config;
  const std::uint64_t seed = config.seed;

  std::vector<double> energies;
  double beta, minSigma, covFactor, oscBeta;
  std::size_t n, oscN;
  ChainConfig chain;
  OscillatorParams<double> osc;
  try {
    energies = p.at("energies").get<std::vector<double>>();
    beta = p.at("beta").get<double>();
    n = p.at("samples").get<std::size_t>();
    chain = chainFromJson(p.at("chain"));
    minSigma = p.at("bh_min_sigma").get<double>();
    covFactor = p.at("covariance_factor").get<double>();
    const json& o = p.at("oscillator");
    osc = OscillatorParams<double>(o.at("mass").get<double>(), o.at("omega").get<double>(), o.at("hbar").get<double>(),
                                   o.at("cutoff").get<Index>());
    oscBeta = o.at("beta").get<double>();
    oscN = o.at("samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("compare: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("compare: ") + e.what());
  }
  if (energies.size() < 2 || n < 2 || oscN < 2) throw ConfigError("compare: need two or more energies and samples");
  if (!(beta >= 0.0) || !(oscBeta > 0.0)) throw ConfigError("compare: beta must be >= 0 and oscillator.beta > 0");

  RealVectorX<double> e(Index(energies.size()));
  for (std::size_t i = 0; i < energies.size(); ++i) e(Index(i)) = energies[i];
  const auto h = HermitianOperator<double>::diagonal(e);
  const DensityMatrix<double> rho = canonicalRho(h, beta);
  const Index d = rho.dim();
  const double tol = covFactor * double(d) / std::sqrt(double(n));

  std::vector<State> gapDraws, eigDraws, extDraws;
  SampleBatch<double> bh;
  std::vector<State> glDraws;
  parallelFor(5, [&](std::size_t task) {
    RngStream rng(seed, 200 + task);
    switch (task) {
      case 0: {
        const GapSpec<double> spec(rho);
        for (std::size_t i = 0; i < n; ++i) gapDraws.push_back(sampleGAP(spec, rng));
        break;
      }
      case 1: {
        const EigSampler<double> eig(rho);
        for (std::size_t i = 0; i < n; ++i) eigDraws.push_back(eig(rng));
        break;
      }
      case 2: {
        const auto spec = ExtremalSpec<double>::thermal(h, beta);
        for (std::size_t i = 0; i < n; ++i) extDraws.push_back(sampleExtremal(spec, rng));
        break;
      }
      case 3:
        bh = sampleBrodyHughston(h, beta, rng, chain);
        break;
      default:
        for (std::size_t i = 0; i < oscN; ++i) glDraws.push_back(sampleGuerraLoffredo(oscBeta, osc, rng));
    }
  });

  const Summary gap = summarize(gapDraws, rho, false);
  const Summary eig = summarize(eigDraws, rho, false);
  const Summary ext = summarize(extDraws, rho, false);
  const Summary bhs = summarize(bh.samples, rho, true);
  const DensityMatrix<double> rhoOsc = canonicalRho(oscillatorHamiltonian(osc), oscBeta);
  const Summary gl = summarize(glDraws, rhoOsc, false);

  auto covCheck = [&](const std::string& name, const Summary& s) {
    report.add({"covariance " + name, s.traceDistance <= tol,
                json{{"trace_distance", s.traceDistance}, {"tolerance", tol}}});
  };
  covCheck("gap", gap);
  covCheck("eig", eig);
  covCheck("extremal", ext);
  {
    const RealVectorX<double> p = boltzmannWeights<double>(e, beta);
    double worst = 0.0;
    for (const auto& s : extDraws)
      for (Index k = 0; k < d; ++k) worst = std::max(worst, std::abs(std::abs(s(k)) - std::sqrt(p(k))));
    report.add({"extremal moduli equal sqrt(p_n)", worst <= 1e-12, json{{"max_deviation", worst}}});
  }
  report.add({"eig draws are eigenvectors", eig.meanRayDistance > 0.0 && [&] {
                for (const auto& s : eigDraws)
                  if (s.vector().cwiseAbs2().maxCoeff() < 1.0 - 1e-10) return false;
                return true;
              }(),
              json::object()});
  const double bhSigma = maxAbs(bhs.diagonalZ);
  report.add({"brody-hughston covariance differs from the canonical state", bhSigma > minSigma,
              json{{"max_abs_diagonal_z", bhSigma},
                   {"required", minSigma},
                   {"acceptance_rate", bh.diagnostics.acceptanceRate},
                   {"effective_sample_size", bh.diagnostics.effectiveSampleSize},
                   {"acceptance_warning", bh.diagnostics.acceptanceWarning}}});

  // Guerra-Loffredo: the occupations follow the truncated Bose distribution.
  // Sparsely populated levels are left out: there |<n|alpha>|^2 is driven by
  // rare large-amplitude draws and the normal approximation breaks down.
  constexpr double kMinPopulation = 1e-3;
  std::size_t occupied = 0;
  for (Index k = 0; k < rhoOsc.dim(); ++k)
    if (rhoOsc.matrix()(k, k).real() >= kMinPopulation) ++occupied;
  const double glZ = suiteZThreshold(std::max<std::size_t>(occupied, 1), 0.01);
  double glWorst = 0.0;
  for (Index k = 0; k < rhoOsc.dim(); ++k)
    if (rhoOsc.matrix()(k, k).real() >= kMinPopulation) glWorst = std::max(glWorst, std::abs(gl.diagonalZ[std::size_t(k)]));
  const double tail = std::exp(-oscBeta * osc.hbar * osc.omega * double(osc.cutoff));
  const double glTol = std::max(tail, covFactor * double(osc.cutoff) / std::sqrt(double(oscN)));
  report.add({"guerra-loffredo covariance matches the truncated canonical state", gl.traceDistance <= glTol,
              json{{"trace_distance", gl.traceDistance}, {"tolerance", glTol}, {"truncation_tail", tail}}});
  report.add({"guerra-loffredo occupations match the canonical state", glWorst <= glZ,
              json{{"max_abs_z", glWorst}, {"threshold", glZ}, {"levels_tested", occupied}}});

  report.results = json{{"dimension", d},
                        {"beta", beta},
                        {"gap", summaryJson(gap)},
                        {"eig", summaryJson(eig)},
                        {"extremal", summaryJson(ext)},
                        {"brody_hughston", summaryJson(bhs)},
                        {"guerra_loffredo", summaryJson(gl)}};
  return report;
}

}  // namespace gapsphere::experiments
