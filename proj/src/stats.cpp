#include "gapsphere/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gapsphere::stats {

namespace {

DensityMatrix<double> finishCovariance(Matrix acc, double total) {
  require(total > 0.0, "empiricalCovariance: total weight must be positive");
  acc /= total;
  acc = (acc + acc.adjoint().eval()) / 2.0;
  acc /= acc.trace().real();
  return DensityMatrix<double>(Unchecked{}, std::move(acc));
}

void addOuter(Matrix& acc, const Vector& v, double w) { acc.selfadjointView<Eigen::Lower>().rankUpdate(v, w); }

Matrix fullFromLower(const Matrix& lower) {
  Matrix full = lower.selfadjointView<Eigen::Lower>();
  return full;
}

}  // namespace

DensityMatrix<double> empiricalCovariance(std::span<const State> samples) {
  require(!samples.empty(), "empiricalCovariance: no samples");
  const Index d = samples.front().dim();
  Matrix acc = Matrix::Zero(d, d);
  for (const auto& s : samples) {
    require(s.dim() == d, "empiricalCovariance: dimension mismatch");
    addOuter(acc, s.vector(), 1.0);
  }
  return finishCovariance(fullFromLower(acc), double(samples.size()));
}

DensityMatrix<double> empiricalCovariance(std::span<const WeightedSample<double>> samples) {
  require(!samples.empty(), "empiricalCovariance: no samples");
  const Index d = samples.front().vector.size();
  Matrix acc = Matrix::Zero(d, d);
  double total = 0.0;
  for (const auto& s : samples) {
    require(s.vector.size() == d, "empiricalCovariance: dimension mismatch");
    require(s.weight >= 0.0 && std::isfinite(s.weight), "empiricalCovariance: weights must be finite and >= 0");
    addOuter(acc, s.vector, s.weight);
    total += s.weight * s.vector.squaredNorm();
  }
  return finishCovariance(fullFromLower(acc), total);
}

double traceDistance(const Matrix& rho, const Matrix& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw ContractViolation("traceDistance: dimension mismatch");
  const Matrix diff = rho - sigma;
  Eigen::SelfAdjointEigenSolver<Matrix> es((diff + diff.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return std::min(1.0, 0.5 * es.eigenvalues().cwiseAbs().sum());
}

double traceDistance(const DensityMatrix<double>& rho, const DensityMatrix<double>& sigma) {
  return traceDistance(rho.matrix(), sigma.matrix());
}

double covarianceTolerance(Index d, std::size_t n) { return 5.0 * double(d) / std::sqrt(double(n)); }

TestFunction TestFunction::marginal(Vector phi, std::string label) {
  return polynomial(std::move(phi), 1, std::move(label));
}

TestFunction TestFunction::polynomial(Vector phi, int r, std::string label) {
  require(r >= 1, "TestFunction: power must be >= 1");
  TestFunction f;
  f.kind = r == 1 ? Kind::Marginal : Kind::Polynomial;
  f.phi = std::move(phi);
  f.power = r;
  f.label = std::move(label);
  return f;
}

TestFunction TestFunction::realPart(Vector phi, Vector phiPrime, std::string label) {
  TestFunction f;
  f.kind = Kind::RealPart;
  f.phi = std::move(phi);
  f.phiPrime = std::move(phiPrime);
  f.label = std::move(label);
  return f;
}

double TestFunction::operator()(const Vector& psi) const {
  const std::complex<double> a = phi.dot(psi);
  if (kind == Kind::RealPart) return (a * std::conj(phiPrime.dot(psi))).real();
  return std::pow(std::norm(a), power);
}

std::vector<TestFunction> defaultDictionary(const Matrix& eigenbasis, RngStream& rng, int haarCount,
                                            int realPartCount) {
  const Index d = eigenbasis.rows();
  std::vector<Vector> phis;
  std::vector<std::string> names;
  for (Index n = 0; n < eigenbasis.cols(); ++n) {
    phis.push_back(eigenbasis.col(n));
    names.push_back("eig" + std::to_string(n));
  }
  for (int j = 0; j < haarCount; ++j) {
    phis.push_back(sampleUniformSphere<double>(d, rng).vector());
    names.push_back("haar" + std::to_string(j));
  }
  std::vector<TestFunction> out;
  for (std::size_t i = 0; i < phis.size(); ++i)
    for (int r = 1; r <= 3; ++r)
      out.push_back(TestFunction::polynomial(phis[i], r, "|<" + names[i] + "|psi>|^" + std::to_string(2 * r)));
  for (int j = 0; j < realPartCount; ++j) {
    Vector a = sampleUniformSphere<double>(d, rng).vector();
    Vector b = sampleUniformSphere<double>(d, rng).vector();
    out.push_back(TestFunction::realPart(std::move(a), std::move(b), "Re<a" + std::to_string(j) + "|psi><psi|b" +
                                                                         std::to_string(j) + ">"));
  }
  return out;
}

std::vector<TestFunction> transformDictionary(const std::vector<TestFunction>& functions, const Matrix& u) {
  std::vector<TestFunction> out = functions;
  for (auto& f : out) {
    f.phi = u * f.phi;
    if (f.kind == TestFunction::Kind::RealPart) f.phiPrime = u * f.phiPrime;
  }
  return out;
}

double DiscrepancyReport::maxAbsZ() const {
  double m = 0.0;
  for (const auto& e : entries)
    if (!e.excluded && !e.pValue) m = std::max(m, std::abs(e.z));
  return m;
}

void DiscrepancyReport::finalize() {
  pass = true;
  for (const auto& e : entries)
    if (!e.excluded && !e.pass) pass = false;
}

nlohmann::ordered_json toJson(const DiscrepancyEntry& e) {
  nlohmann::ordered_json j;
  j["label"] = e.label;
  j["estimate_a"] = e.estimateA;
  j["estimate_b"] = e.estimateB;
  j["standard_error"] = e.standardError;
  j["z"] = e.z;
  if (e.pValue) j["p_value"] = *e.pValue;
  j["excluded"] = e.excluded;
  j["pass"] = e.pass;
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

nlohmann::ordered_json toJson(const DiscrepancyReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["z_threshold"] = r.zThreshold;
  j["alpha"] = r.alpha;
  j["pass"] = r.pass;
  j["max_abs_z"] = r.maxAbsZ();
  j["notes"] = r.notes;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) entries.push_back(toJson(e));
  j["entries"] = std::move(entries);
  return j;
}

MeanEstimate weightedMean(std::span<const double> values, std::span<const double> weights) {
  require(!values.empty(), "weightedMean: no values");
  require(weights.empty() || weights.size() == values.size(), "weightedMean: weight count mismatch");
  const std::size_t n = values.size();
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    sw += w;
    swx += w * values[i];
  }
  require(sw > 0.0, "weightedMean: total weight must be positive");
  const double mean = swx / sw;
  double s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    s2 += w * w * (values[i] - mean) * (values[i] - mean);
  }
  // For unit weights this is the usual s^2 / N with the N - 1 correction.
  double se2 = s2 / (sw * sw);
  if (weights.empty() && n > 1) se2 *= double(n) / double(n - 1);
  return {mean, std::sqrt(se2)};
}

std::vector<double> evaluate(const TestFunction& f, std::span<const State> samples) {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(f(s));
  return v;
}

namespace {

void requireSampleSize(const SampleView& v, const char* who) {
  require(v.states.size() >= kMinDiscrepancySamples,
          std::string(who) + ": at least " + std::to_string(kMinDiscrepancySamples) + " samples required");
  require(v.weights.empty() || v.weights.size() == v.states.size(), std::string(who) + ": weight count mismatch");
}

constexpr double kDegenerateSe = 1e-14;

}  // namespace

DiscrepancyReport discrepancy(SampleView a, SampleView b, const std::vector<TestFunction>& functions,
                              double zThreshold) {
  requireSampleSize(a, "discrepancy");
  requireSampleSize(b, "discrepancy");
  DiscrepancyReport report;
  report.zThreshold = zThreshold;
  for (const auto& f : functions) {
    const auto va = evaluate(f, a.states);
    const auto vb = evaluate(f, b.states);
    const MeanEstimate ma = weightedMean(va, a.weights);
    const MeanEstimate mb = weightedMean(vb, b.weights);
    DiscrepancyEntry e;
    e.label = f.label;
    e.estimateA = ma.mean;
    e.estimateB = mb.mean;
    e.standardError = std::hypot(ma.standardError, mb.standardError);
    if (e.standardError < kDegenerateSe) {
      e.excluded = true;
      e.note = "zero-variance";
    } else {
      e.z = (ma.mean - mb.mean) / e.standardError;
      e.pass = std::abs(e.z) <= zThreshold;
    }
    report.entries.push_back(std::move(e));
  }
  report.finalize();
  return report;
}

DiscrepancyReport discrepancy(SampleView a, const std::function<double(const TestFunction&)>& reference,
                              const std::vector<TestFunction>& functions, double zThreshold) {
  requireSampleSize(a, "discrepancy");
  DiscrepancyReport report;
  report.zThreshold = zThreshold;
  for (const auto& f : functions) {
    const MeanEstimate ma = weightedMean(evaluate(f, a.states), a.weights);
    DiscrepancyEntry e;
    e.label = f.label;
    e.estimateA = ma.mean;
    e.estimateB = reference(f);
    e.standardError = ma.standardError;
    if (e.standardError < kDegenerateSe) {
      e.excluded = true;
      e.note = "zero-variance";
    } else {
      e.z = (e.estimateA - e.estimateB) / e.standardError;
      e.pass = std::abs(e.z) <= zThreshold;
    }
    report.entries.push_back(std::move(e));
  }
  report.finalize();
  return report;
}

double kolmogorovQ(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double kuiperQ(double lambda) {
  if (lambda < 0.4) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double l2 = double(k) * double(k) * lambda * lambda;
    const double term = (4.0 * l2 - 1.0) * std::exp(-2.0 * l2);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ksTest(std::span<const double> samples, const std::function<double(double)>& cdf) {
  require(samples.size() >= kMinKsSamples,
          "ksTest: at least " + std::to_string(kMinKsSamples) + " samples required");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  const double rn = std::sqrt(n);
  return {d, kolmogorovQ((rn + 0.12 + 0.11 / rn) * d), x.size()};
}

KsResult ksTest(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= kMinKsSamples && b.size() >= kMinKsSamples,
          "ksTest: at least " + std::to_string(kMinKsSamples) + " samples required per side");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = double(x.size()), ny = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / nx - double(j) / ny));
  }
  const double ne = nx * ny / (nx + ny);
  const double rn = std::sqrt(ne);
  return {d, kolmogorovQ((rn + 0.12 + 0.11 / rn) * d), std::size_t(ne)};
}

KsResult circularUniformityTest(std::span<const double> angles, int originGrid) {
  require(angles.size() >= kMinKsSamples,
          "circularUniformityTest: at least " + std::to_string(kMinKsSamples) + " samples required");
  require(originGrid >= 1, "circularUniformityTest: origin grid must be positive");
  constexpr double twoPi = 2.0 * std::numbers::pi;
  std::vector<double> u(angles.size());
  double best = 0.0;
  const double n = double(angles.size());
  for (int g = 0; g < originGrid; ++g) {
    const double origin = double(g) / double(originGrid);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      double x = angles[i] / twoPi - origin;
      x -= std::floor(x);
      u[i] = x;
    }
    std::sort(u.begin(), u.end());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) d = std::max({d, double(i + 1) / n - u[i], u[i] - double(i) / n});
    best = std::max(best, d);
  }
  const double rn = std::sqrt(n);
  return {best, kuiperQ((rn + 0.155 + 0.24 / rn) * best), angles.size()};
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "pearson: need two equal-length series");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  // Relative cutoff: rounding noise in a constant series is not variance.
  auto flat = [&](double s, double m) { return s <= 1e-20 * n * std::max(1.0, m * m); };
  if (flat(sxx, mx) || flat(syy, my)) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

DiscrepancyReport phaseUniformity(std::span<const State> samples, const Matrix& eigenbasis, double alpha,
                                  double corrThreshold) {
  require(!samples.empty(), "phaseUniformity: no samples");
  require(isometryDefect<double>(eigenbasis) <= tolerances::orthonormal, "phaseUniformity: basis not orthonormal");
  const Index k = eigenbasis.cols();
  const std::size_t n = samples.size();
  DiscrepancyReport report;
  report.name = "phase-uniformity";
  report.alpha = alpha;
  report.zThreshold = corrThreshold;

  std::vector<std::vector<double>> phase(k), cosP(k), sinP(k), modulus(k);
  std::vector<bool> active(k, false);
  for (Index c = 0; c < k; ++c) {
    phase[c].resize(n);
    cosP[c].resize(n);
    sinP[c].resize(n);
    modulus[c].resize(n);
    double maxAbs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::complex<double> z = eigenbasis.col(c).dot(samples[i].vector());
      phase[c][i] = std::arg(z) < 0 ? std::arg(z) + 2.0 * std::numbers::pi : std::arg(z);
      cosP[c][i] = std::cos(phase[c][i]);
      sinP[c][i] = std::sin(phase[c][i]);
      modulus[c][i] = std::norm(z);
      maxAbs = std::max(maxAbs, std::abs(z));
    }
    active[c] = maxAbs > tolerances::component;
    if (!active[c]) report.notes.push_back("coefficient " + std::to_string(c) + " vanishes; skipped");
  }

  const double rootN = std::sqrt(double(n));
  auto correlationEntry = [&](std::string label, std::span<const double> x, std::span<const double> y) {
    DiscrepancyEntry e;
    e.label = std::move(label);
    const auto r = pearson(x, y);
    if (!r) {
      e.excluded = true;
      e.note = "zero-variance";
    } else {
      e.estimateA = *r;
      e.standardError = 1.0 / rootN;
      e.z = *r * rootN;
      e.pass = std::abs(e.z) <= corrThreshold;
    }
    report.entries.push_back(std::move(e));
  };

  for (Index c = 0; c < k; ++c) {
    if (!active[c]) continue;
    const std::string tag = "arg Z" + std::to_string(c);
    DiscrepancyEntry e;
    e.label = tag + " uniform";
    const KsResult ks = circularUniformityTest(phase[c]);
    e.estimateA = ks.statistic;
    e.pValue = ks.pValue;
    e.pass = ks.pValue >= alpha;
    report.entries.push_back(std::move(e));
    for (Index m = 0; m < k; ++m) {
      if (!active[m]) continue;
      const std::string mod = "|Z" + std::to_string(m) + "|^2";
      correlationEntry("corr(cos " + tag + ", " + mod + ")", cosP[c], modulus[m]);
      correlationEntry("corr(sin " + tag + ", " + mod + ")", sinP[c], modulus[m]);
    }
    for (Index m = c + 1; m < k; ++m) {
      if (!active[m]) continue;
      const std::string other = "arg Z" + std::to_string(m);
      correlationEntry("corr(cos " + tag + ", cos " + other + ")", cosP[c], cosP[m]);
      correlationEntry("corr(cos " + tag + ", sin " + other + ")", cosP[c], sinP[m]);
      correlationEntry("corr(sin " + tag + ", cos " + other + ")", sinP[c], cosP[m]);
      correlationEntry("corr(sin " + tag + ", sin " + other + ")", sinP[c], sinP[m]);
    }
  }
  report.finalize();
  return report;
}

Matrix evolutionOperator(const SpectralDecomposition<double>& h, double t) {
  Vector phases(h.dim());
  for (Index n = 0; n < h.dim(); ++n) phases(n) = std::polar(1.0, -h.eigenvalues(n) * t);
  return h.eigenvectors * phases.asDiagonal() * h.eigenvectors.adjoint();
}

DiscrepancyReport stationarityCheck(std::span<const State> samples, const HermitianOperator<double>& h,
                                    const std::vector<double>& times, const std::vector<TestFunction>& functions,
                                    const DensityMatrix<double>* rho, double zThreshold) {
  require(!samples.empty(), "stationarityCheck: no samples");
  DiscrepancyReport report;
  report.name = "stationarity";
  report.zThreshold = zThreshold;
  if (rho) {
    const Matrix comm = h.matrix() * rho->matrix() - rho->matrix() * h.matrix();
    if (maxAbs<double>(comm) > 1e-10)
      report.notes.push_back("[H, rho] != 0: stationarity is not expected to hold");
  }
  const auto eig = spectral(h);
  for (double t : times) {
    std::vector<State> evolved;
    evolved.reserve(samples.size());
    if (t == 0.0) {
      evolved.assign(samples.begin(), samples.end());
    } else {
      const Matrix u = evolutionOperator(eig, t);
      for (const auto& s : samples) evolved.emplace_back(u * s.vector(), 1e-10);
    }
    // Each evolved draw is paired with its own starting point, so the
    // standard error comes from the per-draw differences.
    for (const auto& f : functions) {
      const auto before = evaluate(f, samples);
      const auto after = evaluate(f, evolved);
      std::vector<double> diff(before.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = after[i] - before[i];
      const MeanEstimate md = weightedMean(diff);
      DiscrepancyEntry e;
      e.label = "t=" + std::to_string(t) + ": " + f.label;
      e.estimateA = weightedMean(after).mean;
      e.estimateB = weightedMean(before).mean;
      e.standardError = md.standardError;
      if (md.standardError < kDegenerateSe) {
        e.note = "paired differences vanish";
        e.pass = std::abs(md.mean) <= kDegenerateSe;
      } else {
        e.z = md.mean / md.standardError;
        e.pass = std::abs(e.z) <= zThreshold;
      }
      report.entries.push_back(std::move(e));
    }
  }
  report.finalize();
  return report;
}

}  // namespace gapsphere::stats
