#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gapsphere/gap.hpp"
#include "gapsphere/quadrature.hpp"
#include "gapsphere/stats.hpp"
#include "gapsphere/subsystem.hpp"
#include "gapsphere/twolevel.hpp"
#include "test_support.hpp"

using namespace gapsphere;
using gapsphere::testing::randomDensity;
using gapsphere::testing::zAgainst;
using gapsphere::testing::zBetween;
using M = MatrixX<double>;
using V = VectorX<double>;
using C = std::complex<double>;
constexpr double kPi = std::numbers::pi;

namespace {

DensityMatrix<double> diag(std::initializer_list<double> p) {
  RealVectorX<double> v(static_cast<Index>(p.size()));
  Index i = 0;
  for (double x : p) v(i++) = x;
  return DensityMatrix<double>::diagonal(v);
}

std::vector<StateVector<double>> drawGap(const GapSpec<double>& spec, int n, RngStream& rng) {
  std::vector<StateVector<double>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sampleGAP(spec, rng));
  return out;
}

}  // namespace

TEST_CASE("GapSpec: support and rank") {
  const GapSpec<double> spec(diag({0.5, 0.5, 0.0}));
  CHECK(spec.rank() == 2);
  const M p = spec.supportProjector();
  CHECK(maxAbs<double>(p * p - p) < 1e-10);
  CHECK(spec.weights().sum() == doctest::Approx(1.0));
}

TEST_CASE("sampleG: pure rho gives multiples of phi") {
  RngStream rng(1);
  V phi(3);
  phi << C(1, 0), C(0, 1), C(1, 1);
  phi.normalize();
  const GapSpec<double> spec(DensityMatrix<double>::pure(StateVector<double>(phi)));
  for (int i = 0; i < 50; ++i) {
    const V x = sampleG(spec, rng);
    const C c = phi.dot(x);
    CHECK((x - c * phi).norm() < 1e-12);
  }
}

TEST_CASE("sampleG: E|Psi^G|^2 = tr rho = 1") {
  RngStream rng(2);
  const GapSpec<double> spec(randomDensity(5, rng));
  std::vector<double> n2;
  for (int i = 0; i < 100000; ++i) n2.push_back(sampleG(spec, rng).squaredNorm());
  CHECK(std::abs(zAgainst(n2, 1.0)) <= 3.0);
}

TEST_CASE("sampleG, sampleGA, sampleGAP: no mass outside support") {
  RngStream rng(3);
  const GapSpec<double> spec(diag({0.5, 0.5, 0.0}));
  for (int i = 0; i < 100; ++i) {
    CHECK(sampleG(spec, rng)(2) == C(0, 0));
    CHECK(sampleGA(spec, rng)(2) == C(0, 0));
    CHECK(sampleGAP(spec, rng)(2) == C(0, 0));
  }
}

TEST_CASE("sampleGA: E|Psi^GA|^2 = 1 + sum p_n^2, confirmed by importance-weighted G draws") {
  RngStream rng(4);
  RealVectorX<double> p;
  const GapSpec<double> spec(randomDensity(4, rng, &p));
  const double exact = 1.0 + p.squaredNorm();

  std::vector<double> ga;
  for (int i = 0; i < 100000; ++i) ga.push_back(sampleGA(spec, rng).squaredNorm());
  CHECK(std::abs(zAgainst(ga, exact)) <= 3.0);

  // Oracle: E_GA[|psi|^2] = E_G[|psi|^4].
  std::vector<double> weighted;
  for (int i = 0; i < 200000; ++i) {
    const double n2 = sampleG(spec, rng).squaredNorm();
    weighted.push_back(n2 * n2);
  }
  CHECK(std::abs(zAgainst(weighted, exact)) <= 3.0);
  CHECK(std::abs(zBetween(ga, weighted)) <= 3.0);
}

TEST_CASE("sampleGA: pure rho has Gamma(2, 1) squared modulus") {
  RngStream rng(5);
  V phi = V::Zero(3);
  phi(1) = 1.0;
  const GapSpec<double> spec(DensityMatrix<double>::pure(StateVector<double>(phi)));
  std::vector<double> s;
  for (int i = 0; i < 100000; ++i) s.push_back(std::norm(sampleGA(spec, rng)(1)));
  const auto ks = stats::ksTest(s, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x) * (1.0 + x); });
  CHECK(ks.pValue > 0.01);

  // Oracle: the same law from G draws weighted by |psi|^2.
  std::vector<double> g, w;
  for (int i = 0; i < 100000; ++i) {
    const double x = std::norm(sampleG(spec, rng)(1));
    g.push_back(x);
    w.push_back(x);
  }
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      den += w[i];
      if (g[i] <= t) num += w[i];
    }
    CHECK(num / den == doctest::Approx(1.0 - std::exp(-t) * (1.0 + t)).epsilon(0.02));
  }
}

TEST_CASE("sampleGA: phases are uniform and independent of moduli") {
  RngStream rng(6);
  const auto rho = diag({0.6, 0.3, 0.1});
  const GapSpec<double> spec(rho);
  std::vector<StateVector<double>> draws;
  for (int i = 0; i < 50000; ++i) draws.push_back(projectToSphere<double>(sampleGA(spec, rng)));
  const auto report = stats::phaseUniformity(draws, M::Identity(3, 3));
  CHECK(report.pass);
}

TEST_CASE("sampleGAP: rho = I/k gives Beta(1, k-1) marginals") {
  for (Index k : {2, 3, 5}) {
    RngStream rng(7, std::uint64_t(k));
    const GapSpec<double> spec(DensityMatrix<double>::maximallyMixed(k));
    std::vector<double> x;
    for (int i = 0; i < 100000; ++i) x.push_back(std::norm(sampleGAP(spec, rng)(0)));
    const auto ks = stats::ksTest(x, [k](double t) { return 1.0 - std::pow(1.0 - std::clamp(t, 0.0, 1.0), double(k - 1)); });
    CHECK(ks.pValue > 0.01);
  }
}

TEST_CASE("sampleGAP: pure rho gives e^{i theta} phi with uniform theta") {
  RngStream rng(8);
  V phi(2);
  phi << C(0.6, 0.0), C(0.0, 0.8);
  const GapSpec<double> spec(DensityMatrix<double>::pure(StateVector<double>(phi)));
  std::vector<double> theta;
  for (int i = 0; i < 20000; ++i) {
    const auto psi = sampleGAP(spec, rng);
    const C c = phi.dot(psi.vector());
    CHECK(std::abs(c) == doctest::Approx(1.0).epsilon(1e-12));
    theta.push_back(std::arg(c) + kPi);
  }
  CHECK(stats::circularUniformityTest(theta).pValue > 0.01);
}

TEST_CASE("sampleGAP: empirical covariance approaches rho") {
  RngStream rng(9);
  for (Index d : {2, 4, 7}) {
    const auto rho = randomDensity(d, rng);
    const GapSpec<double> spec(rho);
    const auto draws = drawGap(spec, 100000, rng);
    const double td = stats::traceDistance(stats::empiricalCovariance(draws), rho);
    CHECK(td <= stats::covarianceTolerance(d, draws.size()));
  }
}

TEST_CASE("sampleGAP: degenerate rho is independent of the chosen eigenbasis") {
  RngStream rng(10);
  const auto rho = diag({0.25, 0.25, 0.5});
  // Rotate within the degenerate pair.
  auto eig = spectral(rho);
  M rotated = eig.eigenvectors;
  M u = haarUnitary<double>(2, rng).matrix();
  rotated.leftCols(2) = eig.eigenvectors.leftCols(2) * u;
  const GapSpec<double> a(rho);
  const GapSpec<double> b(rho, SpectralDecomposition<double>{eig.eigenvalues, rotated});
  RngStream ra(11), rb(12), rd(13);
  const auto da = drawGap(a, 20000, ra);
  const auto db = drawGap(b, 20000, rb);
  const auto dict = stats::defaultDictionary(M::Identity(3, 3), rd);
  CHECK(stats::discrepancy({da}, {db}, dict).maxAbsZ() <= 4.0);
}

TEST_CASE("densityG: standard complex Gaussian peak is 1/pi") {
  const GapSpec<double> spec(DensityMatrix<double>::maximallyMixed(1));
  const auto v = densityG(spec, V(V::Zero(1)));
  CHECK(v.value == doctest::Approx(1.0 / kPi));
  CHECK((v.reference == ReferenceMeasure::LebesgueOnSupport));
  CHECK_FALSE(v.outsideSupport);
}

TEST_CASE("densityG and densityGA integrate to 1 on the support (Monte Carlo quadrature)") {
  // Importance sampling with a standard complex Gaussian proposal in support coordinates.
  RngStream rng(14);
  for (Index k : {1, 2, 3}) {
    RealVectorX<double> p(k + 1);
    p.setZero();
    for (Index i = 0; i < k; ++i) p(i) = double(i + 1);
    p /= p.sum();
    const auto rho = DensityMatrix<double>::fromSpectrum(p, haarUnitary<double>(k + 1, rng).matrix());
    const GapSpec<double> spec(rho);
    REQUIRE(spec.rank() == k);
    double sumG = 0.0, sumGA = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const V z = complexGaussianVector<double>(k, rng);
      const double q = std::exp(-z.squaredNorm()) / std::pow(kPi, double(k));
      const V psi = spec.supportBasis() * z;
      sumG += densityG(spec, psi).value / q;
      sumGA += densityGA(spec, psi).value / q;
    }
    CHECK(sumG / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(sumGA / n == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("densityG: invariant under unitaries commuting with rho") {
  RngStream rng(15);
  RealVectorX<double> p;
  M v;
  const auto rho = randomDensity(3, rng, &p, &v);
  const GapSpec<double> spec(rho);
  V phases(3);
  for (Index i = 0; i < 3; ++i) phases(i) = rng.phase();
  const M u = v * phases.asDiagonal() * v.adjoint();
  for (int i = 0; i < 10; ++i) {
    const V psi = complexGaussianVector<double>(3, rng);
    CHECK(std::log(densityG(spec, psi).value) == doctest::Approx(std::log(densityG(spec, V(u * psi)).value)));
  }
}

TEST_CASE("densityG: components outside the support give zero with a flag") {
  const GapSpec<double> spec(diag({0.5, 0.5, 0.0}));
  V psi(3);
  psi << 0.1, 0.2, 1e-3;
  const auto g = densityG(spec, psi);
  CHECK(g.outsideSupport);
  CHECK(g.value == 0.0);
  psi(2) = 1e-10;
  CHECK_FALSE(densityG(spec, psi).outsideSupport);
  CHECK(densityGAP(spec, StateVector<double>::basis(3, 2)).outsideSupport);
}

TEST_CASE("densityGA: vanishes at 0 and is |psi|^2 densityG") {
  RngStream rng(16);
  const GapSpec<double> spec(randomDensity(3, rng));
  CHECK(densityGA(spec, V(V::Zero(3))).value == 0.0);
  for (int i = 0; i < 10; ++i) {
    const V psi = complexGaussianVector<double>(3, rng);
    CHECK(densityGA(spec, psi).value / densityG(spec, psi).value == doctest::Approx(psi.squaredNorm()));
  }
}

TEST_CASE("densityGAP: uniform case is the reciprocal sphere area") {
  for (Index k : {2, 3, 4}) {
    const GapSpec<double> spec(DensityMatrix<double>::maximallyMixed(k));
    const double expected = std::tgamma(double(k)) / (2.0 * std::pow(kPi, double(k)));
    RngStream rng(17);
    for (int i = 0; i < 5; ++i) {
      const auto v = densityGAP(spec, sampleUniformSphere<double>(k, rng));
      CHECK(v.value == doctest::Approx(expected));
      CHECK((v.reference == ReferenceMeasure::SurfaceOnSupportSphere));
    }
  }
  const GapSpec<double> two(DensityMatrix<double>::maximallyMixed(2));
  CHECK(densityGAP(two, StateVector<double>::basis(2, 0)).value == doctest::Approx(0.050660).epsilon(1e-5));
}

TEST_CASE("densityGAP: integrates to 1 over the support sphere") {
  RngStream rng(18);
  for (Index k : {2, 3}) {
    const auto rho = randomDensity(k, rng);
    const GapSpec<double> spec(rho);
    const double area = 2.0 * std::pow(kPi, double(k)) / std::tgamma(double(k));
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += densityGAP(spec, sampleUniformSphere<double>(k, rng)).value;
    CHECK(area * sum / n == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("densityGAP: pushforward to s = |Z_1|^2 is the two-level f(s)") {
  // Sphere in C^2 with coordinates (s, theta1, theta2) in the eigenbasis:
  // du = (1/2) ds dtheta1 dtheta2. Integrate out both phases numerically.
  RngStream rng(19);
  const M v = haarUnitary<double>(2, rng).matrix();
  for (double p1 : {0.25, 0.5, 0.75, 0.9}) {
    RealVectorX<double> p(2);
    p << p1, 1.0 - p1;
    const GapSpec<double> spec(DensityMatrix<double>::fromSpectrum(p, v));
    const auto tl = twolevel::TwoLevelSpec<double>::fromDelta(p1 / (1.0 - p1));
    const auto rule = gaussLegendre<double>(12, 0.0, 2.0 * kPi);
    for (double s : {0.05, 0.3, 0.5, 0.77, 0.95}) {
      double marginal = 0.0;
      for (Index a = 0; a < rule.nodes.size(); ++a)
        for (Index b = 0; b < rule.nodes.size(); ++b) {
          V coords(2);
          coords << std::sqrt(s) * std::polar(1.0, rule.nodes(a)), std::sqrt(1.0 - s) * std::polar(1.0, rule.nodes(b));
          const StateVector<double> psi(v * coords, 1e-12);
          marginal += 0.5 * rule.weights(a) * rule.weights(b) * densityGAP(spec, psi).value;
        }
      CHECK(std::abs(marginal - twolevel::fDensity(s, tl)) <= 1e-8);
    }
  }
}

TEST_CASE("densityGAP: positive at every GAP sample") {
  RngStream rng(20);
  const GapSpec<double> spec(randomDensity(4, rng));
  for (int i = 0; i < 1000; ++i) CHECK(densityGAP(spec, sampleGAP(spec, rng)).value > 0.0);
}

TEST_CASE("adjustAndProject: recovers rho from G draws; plain projection does not") {
  RngStream rng(21);
  const auto rho = diag({0.9, 0.1});
  const GapSpec<double> spec(rho);
  const int n = 100000;
  std::vector<WeightedSample<double>> g;
  std::vector<StateVector<double>> plain;
  for (int i = 0; i < n; ++i) {
    const V x = sampleG(spec, rng);
    g.push_back({x, 1.0});
    plain.push_back(projectToSphere<double>(x));
  }
  const auto adjusted = adjustAndProject(g);
  for (const auto& s : adjusted) CHECK(std::abs(s.vector.norm() - 1.0) < 1e-12);
  const auto cov = stats::empiricalCovariance(adjusted);
  CHECK(stats::traceDistance(cov, rho) <= stats::covarianceTolerance(2, n));

  std::vector<double> s1;
  for (const auto& s : plain) s1.push_back(std::norm(s(0)));
  CHECK(std::abs(zAgainst(s1, 0.9)) > 5.0);
}

TEST_CASE("adjustAndProject: normalized inputs keep their weights; zero vectors and empty input are errors") {
  std::vector<WeightedSample<double>> s{{V::Unit(2, 0), 0.3}, {V::Unit(2, 1), 0.7}};
  const auto out = adjustAndProject(s);
  CHECK(out[0].weight == doctest::Approx(0.3));
  CHECK(out[1].weight == doctest::Approx(0.7));
  s.push_back({V::Zero(2), 1.0});
  CHECK_THROWS_AS(adjustAndProject(s), DomainError);
  CHECK_THROWS_AS(adjustAndProject(std::vector<WeightedSample<double>>{}), ContractViolation);
}

TEST_CASE("Lemma 1 transport: G draws weighted by |psi|^2 reproduce GAP statistics") {
  RngStream rng(22);
  const auto rho = randomDensity(3, rng);
  const GapSpec<double> spec(rho);
  std::vector<WeightedSample<double>> g;
  for (int i = 0; i < 100000; ++i) g.push_back({sampleG(spec, rng), 1.0});
  const auto adjusted = adjustAndProject(g);
  std::vector<StateVector<double>> states;
  std::vector<double> weights;
  for (const auto& s : adjusted) {
    states.emplace_back(s.vector, 1e-10);
    weights.push_back(s.weight);
  }
  const auto direct = drawGap(spec, 100000, rng);
  RngStream rd(23);
  const auto dict = stats::defaultDictionary(spectral(rho).eigenvectors, rd);
  const auto report = stats::discrepancy({states, weights}, {direct}, dict);
  CHECK(report.maxAbsZ() <= 4.0);
}

TEST_CASE("microcanonical identity: GAP(P/dim) is uniform on the subspace sphere") {
  RngStream rng(24);
  const auto sub = haarOrthonormalSystem<double>(8, 4, rng);
  const DensityMatrix<double> rho(M(sub.vectors() * sub.vectors().adjoint() / 4.0), 1e-12, 1e-12, 1e-12);
  const GapSpec<double> spec(rho);
  CHECK(spec.rank() == 4);
  std::vector<StateVector<double>> gap, uni;
  for (int i = 0; i < 20000; ++i) {
    gap.push_back(sampleGAP(spec, rng));
    uni.push_back(sampleUniformSubspace(sub, rng));
  }
  RngStream rd(25);
  for (int m = 0; m < 3; ++m) {
    const V phi = sub.vectors() * complexGaussianVector<double>(4, rd);
    const auto f = stats::TestFunction::marginal(phi.normalized(), "m");
    CHECK(stats::ksTest(stats::evaluate(f, gap), stats::evaluate(f, uni)).pValue > 0.01);
  }
}
