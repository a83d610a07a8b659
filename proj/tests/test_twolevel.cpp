#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gapsphere/gap.hpp"
#include "gapsphere/quadrature.hpp"
#include "gapsphere/stats.hpp"
#include "gapsphere/twolevel.hpp"

using namespace gapsphere;
using namespace gapsphere::twolevel;
using R = RealVectorX<double>;
using V = VectorX<double>;
constexpr double kPi = std::numbers::pi;

TEST_CASE("TwoLevelSpec: alpha parameters and constructors") {
  const auto s = TwoLevelSpec<double>::fromDelta(2.0);
  CHECK(std::pow(s.alpha2, 3) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::pow(s.alpha1, 3) == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(s.p1() == doctest::Approx(2.0 / 3.0));
  const auto e = TwoLevelSpec<double>::fromEnergies(0.3, 1.1, 0.7);
  CHECK(e.delta == doctest::Approx(std::exp(0.7 * 0.8)).epsilon(1e-14));
  CHECK_THROWS_AS(TwoLevelSpec<double>::fromDelta(0.0), ContractViolation);
  CHECK_THROWS_AS(TwoLevelSpec<double>::fromDelta(-1.0), ContractViolation);
}

TEST_CASE("fDensity: delta = 1 is identically 1; delta = 2 endpoints") {
  const auto one = TwoLevelSpec<double>::fromDelta(1.0);
  for (double s : {0.001, 0.2, 0.5, 0.9, 0.999}) CHECK(fDensity(s, one) == 1.0);
  const auto two = TwoLevelSpec<double>::fromDelta(2.0);
  CHECK(fDensityClosed(0.0, two) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(fDensityClosed(1.0, two) == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
  CHECK(fDensity(1e-9, two) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  CHECK_THROWS_AS(fDensity(0.0, two), DomainError);
  CHECK_THROWS_AS(fDensity(1.0, two), DomainError);
  CHECK_THROWS_AS(fDensityClosed(1.5, two), DomainError);
}

TEST_CASE("f is normalized for random delta: antiderivative identity and quadrature") {
  // Integral of (a1 s + a2 (1 - s))^-3 over [0, 1] is (a1 + a2) / (2 a1^2 a2^2).
  RngStream rng(1);
  for (int i = 0; i < 50; ++i) {
    const double delta = std::exp(std::log(0.05) + (std::log(20.0) - std::log(0.05)) * rng.uniform());
    const auto s = TwoLevelSpec<double>::fromDelta(delta);
    const double closed = (s.alpha1 + s.alpha2) / (2.0 * s.alpha1 * s.alpha1 * s.alpha2 * s.alpha2);
    CHECK(closed == doctest::Approx(1.0).epsilon(1e-12));
    const double quad = integrate<double>([&](double x) { return fDensityClosed(x, s); }, 0.0, 1.0, 8, 32);
    CHECK(std::abs(quad - 1.0) <= 1e-9);
    CHECK(std::abs(fCdf(1.0, s) - 1.0) <= 1e-10);
  }
}

TEST_CASE("fCdf matches the quadrature integral of f") {
  for (double delta : {1.0 / 3.0, 0.9, 1.0, 1.0 + 1e-9, 2.0, 17.0}) {
    const auto s = TwoLevelSpec<double>::fromDelta(delta);
    for (double x : {0.01, 0.3, 0.5, 0.8, 0.99}) {
      const double quad = integrate<double>([&](double t) { return fDensityClosed(t, s); }, 0.0, x, 4, 32);
      CHECK(fCdf(x, s) == doctest::Approx(quad).epsilon(1e-12));
    }
  }
  const auto s = TwoLevelSpec<double>::fromDelta(2.0);
  CHECK(fCdf(-0.1, s) == 0.0);
  CHECK(fCdf(1.5, s) == doctest::Approx(1.0));
}

TEST_CASE("fMean equals p1") {
  CHECK(fMean(TwoLevelSpec<double>::fromDelta(1.0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(fMean(TwoLevelSpec<double>::fromDelta(3.0)) - 0.75) <= 1e-8);
  RngStream rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto s = TwoLevelSpec<double>::fromDelta(0.1 + 9.9 * rng.uniform());
    CHECK(std::abs(fMean(s) - s.p1()) <= 1e-8);
  }
}

TEST_CASE("jointGaModuliDensity: examples, normalization, errors") {
  CHECK(jointGaModuliDensity(0.0, 0.0, 0.3, 0.7) == 0.0);
  CHECK_THROWS_AS(jointGaModuliDensity(0.1, 0.1, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(jointGaModuliDensity(-0.1, 0.1, 0.5, 0.5), DomainError);
  for (double p1 : {0.5, 0.8, 0.25}) {
    const double p2 = 1.0 - p1;
    const double total = integrate<double>(
        [&](double s1) {
          return integrate<double>([&](double s2) { return jointGaModuliDensity(s1, s2, p1, p2); }, 0.0, 60.0 * p2, 16,
                                   20);
        },
        0.0, 60.0 * p1, 16, 20);
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("jointGaModuliDensity: chi-square against sampleGA moduli") {
  const double p1 = 0.7, p2 = 0.3;
  const GapSpec<double> spec(DensityMatrix<double>::diagonal((R(2) << p1, p2).finished()));
  const std::vector<double> f{0.0, 0.5, 1.2, 2.5};
  auto edges = [&](double p) {
    std::vector<double> e;
    for (double x : f) e.push_back(x * p);
    e.push_back(60.0 * p);  // the last cell runs to where the density is negligible
    return e;
  };
  const auto e1 = edges(p1), e2 = edges(p2);
  std::vector<double> probs;
  for (std::size_t i = 0; i + 1 < e1.size(); ++i)
    for (std::size_t j = 0; j + 1 < e2.size(); ++j)
      probs.push_back(integrate<double>(
          [&](double s1) {
            return integrate<double>([&](double s2) { return jointGaModuliDensity(s1, s2, p1, p2); }, e2[j], e2[j + 1],
                                     8, 20);
          },
          e1[i], e1[i + 1], 8, 20));
  RngStream rng(3);
  const int n = 100000;
  std::vector<int> counts(probs.size(), 0);
  auto cell = [](const std::vector<double>& e, double x) {
    std::size_t k = 0;
    while (k + 2 < e.size() && x >= e[k + 1]) ++k;
    return k;
  };
  for (int i = 0; i < n; ++i) {
    const V z = sampleGA(spec, rng);
    ++counts[cell(e1, std::norm(z(0))) * 4 + cell(e2, std::norm(z(1)))];
  }
  double chi2 = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) chi2 += std::pow(counts[c] - n * probs[c], 2) / (n * probs[c]);
  CHECK(chi2 < 30.578);  // upper 1% point, 15 degrees of freedom
}

TEST_CASE("Monte Carlo: |<1|Psi^GAP>|^2 follows fCdf") {
  for (double delta : {1.0 / 3.0, 1.0, 3.0}) {
    CAPTURE(delta);
    const auto tl = TwoLevelSpec<double>::fromDelta(delta);
    const GapSpec<double> spec(DensityMatrix<double>::diagonal((R(2) << tl.p1(), tl.p2()).finished()));
    RngStream rng(4, std::uint64_t(delta * 1000));
    std::vector<double> s;
    for (int i = 0; i < 100000; ++i) s.push_back(std::norm(sampleGAP(spec, rng).vector()(0)));
    CHECK(stats::ksTest(s, [&](double x) { return fCdf(x, tl); }).pValue > 0.01);
  }
}

TEST_CASE("Pushforward of densityGAP onto s matches f on a 200-point grid") {
  // Surface element in eigenbasis coordinates (sqrt(s) e^{i t1}, sqrt(1-s) e^{i t2}): (1/2) ds dt1 dt2.
  RngStream rng(5);
  const auto u = haarUnitary<double>(2, rng).matrix();
  const auto rule = gaussLegendre<double>(8, 0.0, 2.0 * kPi);
  for (double delta : {1.0 / 3.0, 2.0, 3.0}) {
    const auto tl = TwoLevelSpec<double>::fromDelta(delta);
    const GapSpec<double> spec(DensityMatrix<double>::fromSpectrum((R(2) << tl.p1(), tl.p2()).finished(), u));
    double worst = 0.0;
    for (int g = 1; g <= 200; ++g) {
      const double s = (g - 0.5) / 200.0;
      double marginal = 0.0;
      for (Index a = 0; a < rule.nodes.size(); ++a)
        for (Index b = 0; b < rule.nodes.size(); ++b) {
          V c(2);
          c << std::sqrt(s) * std::polar(1.0, rule.nodes(a)), std::sqrt(1.0 - s) * std::polar(1.0, rule.nodes(b));
          marginal += 0.5 * rule.weights(a) * rule.weights(b) * densityGAP(spec, StateVector<double>(V(u * c), 1e-12)).value;
        }
      worst = std::max(worst, std::abs(marginal - fDensity(s, tl)));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("figure1Data: shape of the five curves") {
  const auto rows = figure1Data<double>(figure1Deltas(), 201);
  REQUIRE(rows.size() == 5 * 201);
  for (std::size_t c = 0; c < 5; ++c) {
    const double delta = rows[c * 201].delta;
    std::vector<double> f;
    for (std::size_t i = 0; i < 201; ++i) f.push_back(rows[c * 201 + i].f);
    for (std::size_t i = 1; i + 1 < f.size(); ++i) CHECK(f[i + 1] - 2.0 * f[i] + f[i - 1] >= -1e-9);
    for (std::size_t i = 1; i < f.size(); ++i) {
      if (delta > 1.0) CHECK(f[i] > f[i - 1]);
      if (delta < 1.0) CHECK(f[i] < f[i - 1]);
      if (delta == 1.0) CHECK(f[i] == 1.0);
    }
  }
  CHECK(rows.front().s == 0.0);
  CHECK(rows[200].s == 1.0);
  CHECK_THROWS_AS(figure1Data<double>({1.0}, 1), ContractViolation);
}
