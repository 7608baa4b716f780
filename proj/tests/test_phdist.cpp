#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aoi/phdist.hpp"
#include "aoi/testing/oracles.hpp"

using namespace aoi;

namespace {

PhDistribution make(std::initializer_list<double> alpha, const Matrix& S, double mass0 = 0.0) {
  PhDistribution d;
  d.alpha = RowVector(static_cast<Eigen::Index>(alpha.size()));
  Eigen::Index i = 0;
  for (const double a : alpha) d.alpha(i++) = a;
  d.S = S;
  d.mass0 = mass0;
  return d;
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

double ks_distance(std::vector<double> xs, const PhDistribution& d) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double D = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = cdf(d, xs[i]);
    D = std::max({D, std::abs(F - i / n), std::abs((i + 1) / n - F)});
  }
  return D;
}

}  // namespace

TEST(Validate, ExponentialIsValid) {
  Matrix S(1, 1);
  S << -1.0;
  EXPECT_TRUE(validate(make({1.0}, S)).empty());
}

TEST(Validate, MassNotOne) {
  const Matrix S = -Matrix::Identity(2, 2);
  const auto v = validate(make({0.5, 0.6}, S));
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(mentions(v, "alpha*1+mass0 != 1"));
}

TEST(Validate, ErlangCanonicalForm) {
  Matrix S(2, 2);
  S << -2, 2, 0, -2;
  const auto d = make({1.0, 0.0}, S);
  EXPECT_TRUE(validate(d).empty());
  EXPECT_NEAR(moment(d, 1), 1.0, 1e-14);
}

TEST(Validate, ReportsSignViolations) {
  Matrix S(2, 2);
  S << -1, -0.5, 0.5, 1;
  const auto v = validate(make({0.5, 0.5}, S));
  EXPECT_TRUE(mentions(v, "off-diagonal"));
  EXPECT_TRUE(mentions(v, "diagonal of S not strictly negative"));
}

TEST(Validate, DimensionMismatchIsStructural) {
  const Matrix S = -Matrix::Identity(2, 2);
  EXPECT_THROW(validate(make({1.0}, S)), StructuralError);
  PhDistribution bad;
  bad.alpha = RowVector::Ones(2) / 2;
  bad.S = Matrix::Zero(2, 3);
  EXPECT_THROW(validate(bad), StructuralError);
}

TEST(Validate, MeScreensNegativeDensity) {
  MeDistribution d(RowVector::Zero(2), Matrix::Zero(2, 2), 0.0);
  d.S << -1, 0, 0, -2;
  d.alpha << -1.0, 2.0;  // f = -e^{-x} + 4e^{-2x}, mass 1, negative tail
  const auto v = validate(d);
  EXPECT_TRUE(mentions(v, "pdf negative"));
}

TEST(Validate, MeAcceptsGenuineMe) {
  // A proper ME density with a negative alpha entry: from a PH by similarity.
  const PhDistribution e = erlang(1.0, 3);
  Matrix M = Matrix::Identity(3, 3);
  M(0, 1) = 0.7;
  M(2, 0) = -0.3;
  M.row(0) /= M.row(0).sum();
  M.row(2) /= M.row(2).sum();
  const MeDistribution me(e.alpha * M, M.inverse() * e.S * M, 0.0);
  EXPECT_TRUE(validate(me).empty());
  for (const double x : {0.1, 1.0, 3.0}) EXPECT_NEAR(pdf(me, x), pdf(e, x), 1e-12);
}

TEST(Evaluate, ExponentialClosedForm) {
  const auto d = exponential(2.0);
  EXPECT_NEAR(pdf(d, 0.0), 2.0, 1e-15);
  EXPECT_NEAR(cdf(d, std::log(2.0) / 2.0), 0.5, 1e-15);
}

TEST(Evaluate, ErlangClosedForm) {
  const auto d = erlang(1.0, 2);
  EXPECT_NEAR(cdf(d, 1.0), 1.0 - 3.0 * std::exp(-2.0), 1e-14);
  EXPECT_NEAR(cdf(d, 1.0), 0.59399, 1e-5);
  for (const double x : {0.1, 0.7, 2.5}) {
    EXPECT_NEAR(cdf(d, x), 1.0 - std::exp(-2 * x) * (1 + 2 * x), 1e-14);
  }
}

TEST(Evaluate, HyperexponentialCdfMatchesQuadrature) {
  const auto d = fit_mean_scov(1.0, 4.0);
  for (const double x : {0.5, 1.0, 5.0}) {
    const double q = oracle::integrate([&](double t) { return pdf(d, t); }, 0.0, x, 1e-13);
    EXPECT_NEAR(cdf(d, x), q, 1e-8) << "x=" << x;
  }
}

TEST(Evaluate, NegativeArgumentIsDomainError) {
  EXPECT_THROW(pdf(exponential(1.0), -1e-3), DomainError);
  EXPECT_THROW(cdf(exponential(1.0), -1.0), DomainError);
}

TEST(Evaluate, CdfStartsAtMassAndIsMonotone) {
  PhDistribution d = fit_mean_scov(2.0, 0.4);
  d.alpha *= 0.75;
  d.mass0 = 0.25;
  EXPECT_NEAR(cdf(d, 0.0), 0.25, 1e-15);
  double prev = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double F = cdf(d, 0.2 * i);
    EXPECT_GE(F, prev - 1e-15);
    prev = F;
  }
  EXPECT_NEAR(cdf(d, 40.0 * std::max(1.0, moment(d, 1))), 1.0, 1e-12);
}

TEST(Moments, Exponential) {
  const auto d = exponential(3.0);
  EXPECT_NEAR(moment(d, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(moment(d, 2), 2.0 / 9.0, 1e-15);
}

TEST(Moments, Erlang) { EXPECT_NEAR(moment(erlang(1.0, 2), 2), 1.5, 1e-14); }

TEST(Moments, FitHighVariance) {
  const auto d = fit_mean_scov(1.0, 4.0);
  EXPECT_NEAR(moment(d, 1), 1.0, 1e-12);
  EXPECT_NEAR(moment(d, 2), 5.0, 1e-12);
}

TEST(Moments, MatchQuadratureForAllFits) {
  for (const double scov : {0.1, 0.25, 0.4, 1.0, 2.0, 4.0}) {
    const auto d = fit_mean_scov(1.0, scov);
    const double upper = 60.0 * (1.0 + scov);
    for (int i = 1; i <= 3; ++i) {
      const double q =
          oracle::integrate_panels([&](double x) { return std::pow(x, i) * pdf(d, x); }, upper, 256);
      EXPECT_NEAR(moment(d, i) / q, 1.0, 1e-6) << "scov=" << scov << " i=" << i;
    }
  }
}

TEST(Moments, OrderBelowOneIsDomainError) {
  EXPECT_THROW(moment(exponential(1.0), 0), DomainError);
}

TEST(Fit, HalfScovIsErlangTwo) {
  const auto d = fit_mean_scov(1.0, 0.5);
  ASSERT_EQ(d.order(), 2);
  EXPECT_NEAR(d.S(0, 0), -2.0, 1e-12);
  EXPECT_NEAR(d.S(0, 1), 2.0, 1e-12);
  EXPECT_NEAR(d.alpha(0), 1.0, 1e-12);
}

TEST(Fit, UnitScovIsExponential) {
  const auto d = fit_mean_scov(1.0, 1.0);
  ASSERT_EQ(d.order(), 1);
  EXPECT_NEAR(d.S(0, 0), -1.0, 1e-14);
}

TEST(Fit, MixtureOfErlangTwoAndThree) {
  const auto d = fit_mean_scov(1.0, 0.4);
  EXPECT_EQ(d.order(), 3);
  EXPECT_TRUE(validate(d).empty());
  // Common rate on every stage.
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(d.S(i, i), d.S(0, 0), 1e-12);
  const double m1 = oracle::integrate_panels([&](double x) { return x * pdf(d, x); }, 40.0);
  const double m2 = oracle::integrate_panels([&](double x) { return x * x * pdf(d, x); }, 40.0);
  EXPECT_NEAR(m1, 1.0, 1e-8);
  EXPECT_NEAR(m2 / (m1 * m1) - 1.0, 0.4, 1e-8);
}

TEST(Fit, RoundTripGrid) {
  for (const double mean : {0.1, 1.0, 10.0}) {
    for (const double s : {0.1, 0.25, 0.4, 1.0, 2.0, 4.0, 16.0}) {
      const auto d = fit_mean_scov(mean, s);
      EXPECT_TRUE(validate(d).empty());
      EXPECT_NEAR(moment(d, 1) / mean, 1.0, 1e-10) << mean << " " << s;
      EXPECT_NEAR(scov(d), s, 1e-10) << mean << " " << s;
    }
  }
}

TEST(Fit, RejectsNonPositive) {
  EXPECT_THROW(fit_mean_scov(0.0, 1.0), DomainError);
  EXPECT_THROW(fit_mean_scov(1.0, -1.0), DomainError);
}

TEST(Sample, ExponentialMeanAndReproducibility) {
  const auto d = exponential(1.0);
  RandomStream a(42), b(42);
  const PhSampler sa(d), sb(d);
  double sum = 0.0;
  for (int i = 0; i < 1'000'000; ++i) {
    const double x = sa(a);
    ASSERT_EQ(x, sb(b));
    sum += x;
  }
  const double mean = sum / 1e6;
  EXPECT_GE(mean, 0.997);
  EXPECT_LE(mean, 1.003);
}

TEST(Sample, ErlangFourScov) {
  const auto d = erlang(1.0, 4);
  RandomStream rng(7);
  const PhSampler s(d);
  const int n = 1'000'000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s(rng);
    s1 += x;
    s2 += x * x;
  }
  const double m1 = s1 / n, m2 = s2 / n;
  const double est = m2 / (m1 * m1) - 1.0;
  // Delta-method SE of m2/m1^2 using the analytic moments.
  const double M1 = moment(d, 1), M2 = moment(d, 2), M3 = moment(d, 3), M4 = moment(d, 4);
  const double g1 = -2 * M2 / (M1 * M1 * M1), g2 = 1 / (M1 * M1);
  const double var = g1 * g1 * (M2 - M1 * M1) + 2 * g1 * g2 * (M3 - M1 * M2) +
                     g2 * g2 * (M4 - M2 * M2);
  const double se = std::sqrt(var / n);
  EXPECT_NEAR(est, 0.25, 3 * se);
}

TEST(Sample, AllMassAtZero) {
  PhDistribution d = exponential(1.0);
  d.alpha(0) = 0.0;
  d.mass0 = 1.0;
  RandomStream rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample(d, rng), 0.0);
}

TEST(Sample, KolmogorovSmirnovForFits) {
  RandomStream rng(2024);
  for (const double s : {0.1, 0.25, 0.4, 1.0, 2.0, 4.0, 16.0}) {
    const auto d = fit_mean_scov(1.0, s);
    const PhSampler sampler(d);
    std::vector<double> xs(100'000);
    for (auto& x : xs) x = sampler(rng);
    EXPECT_LE(ks_distance(xs, d), 0.01) << "scov=" << s;
  }
}

TEST(Sample, MeWithNegativeEntriesUnsupported) {
  MeDistribution d(RowVector::Zero(2), Matrix::Zero(2, 2), 0.0);
  d.alpha << 1.5, -0.5;
  d.S << -1, 0, 0, -2;
  RandomStream rng(1);
  EXPECT_THROW(sample(d, rng), UnsupportedOperation);
  // A PH-shaped ME law samples fine.
  EXPECT_GT(sample(MeDistribution(exponential(1.0)), rng), 0.0);
}

TEST(MeFromForm, Exponential) {
  RowVector g(1);
  g << 1;
  Matrix A(1, 1);
  A << -1;
  Vector h(1);
  h << 1;
  const auto d = me_from_form(g, A, h, 0.0);
  for (const double x : {0.0, 0.5, 2.0}) EXPECT_NEAR(pdf(d, x), std::exp(-x), 1e-15);
  EXPECT_NEAR(moment(d, 1), 1.0, 1e-14);
}

TEST(MeFromForm, ErlangRoundTrip) {
  RowVector g(2);
  g << 1, 0;
  Matrix A(2, 2);
  A << -2, 2, 0, -2;
  Vector h(2);
  h << 0, 2;
  const auto d = me_from_form(g, A, h, 0.0);
  const auto e = erlang(1.0, 2);
  for (int i = 0; i <= 200; ++i) {
    const double x = 0.05 * i;
    EXPECT_NEAR(pdf(d, x), pdf(e, x), 1e-10);
  }
}

TEST(MeFromForm, ZeroComponentBranch) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  const int n = 4;
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = i == j ? -3.0 - U(rng) : 0.4 * U(rng);
  }
  // Choose h so that v = -A^-1 h has a zero entry: h = -A v.
  Vector v(n);
  v << 0.7, 0.0, 1.3, 0.4;
  const Vector h = -A * v;
  RowVector g(n);
  for (int i = 0; i < n; ++i) g(i) = U(rng);
  g /= g.dot(v.transpose());  // -g A^-1 h = g v = 1
  const auto d = me_from_form(g, A, h, 0.0);
  double sup = 0.0, scale = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double x = 0.05 * i;
    const double f = (g * linalg::expm(A * x) * h)(0);
    sup = std::max(sup, std::abs(pdf(d, x) - f));
    scale = std::max(scale, std::abs(f));
  }
  EXPECT_LE(sup, 1e-9 * scale);
  // Lemma-1 moments: (-1)^{i+1} i! g A^{-(i+1)} h.
  const Matrix Ainv = A.inverse();
  double fact = 1.0;
  Matrix P = Ainv;
  for (int i = 1; i <= 3; ++i) {
    fact *= i;
    P = P * Ainv;
    const double expected = (i % 2 == 0 ? -1.0 : 1.0) * fact * (g * P * h)(0);
    EXPECT_NEAR(moment(d, i), expected, 1e-10 * std::abs(expected));
  }
}

TEST(MeFromForm, ContractViolations) {
  RowVector g(1);
  g << 2;
  Matrix A(1, 1);
  A << -1;
  Vector h(1);
  h << 1;
  EXPECT_THROW(me_from_form(g, A, h, 0.0), ContractError);
  EXPECT_THROW(me_from_form(g, A, Vector::Zero(1), 0.5), ContractError);
  const auto atom = me_from_form(g, A, Vector::Zero(1), 1.0);
  EXPECT_EQ(atom.mass0, 1.0);
  EXPECT_THROW(me_from_form(g, Matrix::Zero(2, 2), h, 0.0), StructuralError);
}
