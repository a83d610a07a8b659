#include <algorithm>
#include <cmath>

#include "gapsphere/experiments.hpp"
#include "gapsphere/subsystem.hpp"

namespace gapsphere::experiments {

namespace {

using State = StateVector<double>;

double ensembleDeviation(const ConditionalEnsemble<double>& ens, const std::vector<stats::TestFunction>& dict,
                         const std::vector<double>& reference) {
  double worst = 0.0;
  for (std::size_t f = 0; f < dict.size(); ++f) {
    double mean = 0.0;
    for (const auto& d : ens.draws) mean += d.probability * dict[f](d.psi1);
    worst = std::max(worst, std::abs(mean - reference[f]));
  }
  return worst;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double fractionBelow(const std::vector<double>& v, double eps) {
  return double(std::count_if(v.begin(), v.end(), [&](double x) { return x < eps; })) / double(v.size());
}

}  // namespace

RunReport runTypicality(const ExperimentConfig& config) {
  const json& p = config.params;
  RunReport report;
  report.config = config;
  const std::uint64_t seed = config.seed;

  std::vector<Index> sizes;
  std::size_t nPsi, refSamples;
  double eps, minFraction, minRatio;
  std::string mode;
  bool controls;
  int haar, realPart;
  try {
    sizes = p.at("d2").get<std::vector<Index>>();
    nPsi = p.at("n_psi").get<std::size_t>();
    eps = p.at("epsilon").get<double>();
    mode = p.at("basis_mode").get<std::string>();
    haar = p.at("haar_functions").get<int>();
    realPart = p.at("real_part_functions").get<int>();
    refSamples = p.at("reference_samples").get<std::size_t>();
    minFraction = p.at("min_final_fraction").get<double>();
    minRatio = p.at("min_median_ratio").get<double>();
    controls = p.at("controls").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("typicality: ") + e.what());
  }
  if (mode != "fixed" && mode != "random") throw ConfigError("typicality: basis_mode must be fixed or random");
  if (sizes.size() < 2 || nPsi < 1 || !(eps > 0.0)) throw ConfigError("typicality: need two or more d2 values, n_psi >= 1, epsilon > 0");

  RngStream setup(seed, 1);
  const DensityMatrix<double> rho1 = densityFromJson(p.at("rho1"), setup);
  const auto eig = spectral(rho1);
  const Index d1 = rho1.dim();
  Index rank = 0;
  for (Index i = 0; i < d1; ++i)
    if (eig.eigenvalues(i) > tolerances::rank) ++rank;
  for (Index d2 : sizes)
    if (d2 < rank) throw ConfigError("typicality: every d2 must be at least the rank of rho1");

  RngStream refRng(seed, 2);
  const auto reference = gapReference(rho1, refSamples, refRng);
  RngStream dictRng(seed, 3);
  const auto dict = stats::defaultDictionary(eig.eigenvectors, dictRng, haar, realPart);
  std::vector<double> refValues;
  for (const auto& f : dict) refValues.push_back(reference(f));

  // Deviations of N_psi conditional ensembles at environment size d2.
  auto arm = [&](Index d2, std::uint64_t base) {
    const BipartiteSplit split(d1, d2);
    std::vector<double> dev(nPsi);
    const State fixedPsi = [&] {
      RngStream r(seed, base + 999'999);
      return sampleFixedReduced(eig, d2, r);
    }();
    parallelFor(nPsi, [&](std::size_t i) {
      RngStream rng(seed, base + i);
      if (mode == "fixed") {
        const State psi = sampleFixedReduced(eig, d2, rng);
        dev[i] = ensembleDeviation(conditionalEnsemble(psi, UnitaryMatrix<double>::identity(d2), split), dict, refValues);
      } else {
        dev[i] = ensembleDeviation(conditionalEnsemble(fixedPsi, haarUnitary<double>(d2, rng), split), dict, refValues);
      }
    });
    return dev;
  };

  json rows = json::array();
  std::vector<double> fractions, medians;
  for (std::size_t a = 0; a < sizes.size(); ++a) {
    const auto dev = arm(sizes[a], 10'000'000ULL * (a + 1));
    fractions.push_back(fractionBelow(dev, eps));
    medians.push_back(median(dev));
    rows.push_back(json{{"d2", sizes[a]},
                        {"fraction_within_epsilon", fractions.back()},
                        {"median_deviation", medians.back()},
                        {"max_deviation", *std::max_element(dev.begin(), dev.end())}});
  }

  bool nondecreasing = true;
  for (std::size_t a = 1; a < fractions.size(); ++a) nondecreasing = nondecreasing && fractions[a] >= fractions[a - 1];
  report.add({"fraction within epsilon is nondecreasing in d2", nondecreasing, json{{"fractions", fractions}}});
  report.add({"fraction within epsilon at the largest d2", fractions.back() >= minFraction,
              json{{"fraction", fractions.back()}, {"required", minFraction}}});
  const double ratio = medians.back() > 0.0 ? medians.front() / medians.back() : INFINITY;
  report.add({"median deviation shrinks from smallest to largest d2", ratio >= minRatio,
              json{{"ratio", std::isfinite(ratio) ? json(ratio) : json("inf")}, {"required", minRatio}}});

  json controlJson = json::object();
  if (controls) {
    // Minimal environment: d2 equal to the rank leaves no room to concentrate.
    const auto minimal = arm(rank, 90'000'000ULL);
    const double minimalMedian = median(minimal);
    controlJson["minimal_d2"] = json{{"d2", rank},
                                     {"fraction_within_epsilon", fractionBelow(minimal, eps)},
                                     {"median_deviation", minimalMedian}};
    report.add({"control: d2 equal to the rank does not concentrate", minimalMedian > medians.back(),
                json{{"median_minimal", minimalMedian}, {"median_largest", medians.back()}}});

    // Product eigenstates with the environment basis: each conditional
    // ensemble is a single eigenvector, so nothing concentrates at any d2.
    const Index d2 = sizes.back();
    const BipartiteSplit split(d1, d2);
    std::vector<double> dev(nPsi);
    parallelFor(nPsi, [&](std::size_t i) {
      RngStream rng(seed, 95'000'000ULL + i);
      const double u = rng.uniform();
      Index n = d1 - 1;
      double acc = 0.0;
      for (Index k = 0; k < d1; ++k) {
        acc += eig.eigenvalues(k);
        if (u < acc) {
          n = k;
          break;
        }
      }
      const Index q = Index(rng.uniform() * double(d2)) % d2;
      const VectorX<double> psi =
          kron<double>(VectorX<double>(eig.eigenvectors.col(n)), VectorX<double>(VectorX<double>::Unit(d2, q)));
      dev[i] = ensembleDeviation(conditionalEnsemble(State(psi, 1e-10), UnitaryMatrix<double>::identity(d2), split),
                                 dict, refValues);
    });
    const double productMedian = median(dev);
    controlJson["product_eigenbasis"] = json{{"d2", d2},
                                             {"fraction_within_epsilon", fractionBelow(dev, eps)},
                                             {"median_deviation", productMedian}};
    report.add({"control: product eigenstates stay far from GAP", productMedian >= eps,
                json{{"median", productMedian}, {"epsilon", eps}}});
  }

  report.results = json{{"rank", rank}, {"dictionary_size", dict.size()}, {"arms", rows}, {"controls", controlJson}};
  return report;
}

}  // namespace gapsphere::experiments
