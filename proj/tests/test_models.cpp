#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "aoi/models.hpp"
#include "aoi/simulator.hpp"
#include "aoi/testing/oracles.hpp"

using namespace aoi;

namespace {

double max_row_sum(const Matrix& Q) { return Q.rowwise().sum().cwiseAbs().maxCoeff(); }

void expect_partition_covers(const StatePartition& part) {
  Eigen::Index next = 0;
  for (const auto& b : part.blocks()) {
    EXPECT_EQ(b.begin, next) << b.label;
    next += b.size;
  }
  EXPECT_EQ(next, part.size());
}

double cdf_gap(const MeDistribution& a, const MeDistribution& b, double upper) {
  double d = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double x = upper * i / 50.0;
    d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
  }
  return d;
}

void expect_proper(const AgeResult& r) {
  EXPECT_TRUE(std::isfinite(r.mean_aoi) && r.mean_aoi > 0.0);
  EXPECT_TRUE(std::isfinite(r.mean_paoi) && r.mean_paoi > 0.0);
  EXPECT_EQ(r.aoi.mass0, 0.0);
  EXPECT_EQ(r.paoi.mass0, 0.0);
  EXPECT_NEAR(r.aoi_form.total_mass(), 1.0, 1e-9);
  EXPECT_NEAR(r.paoi_form.total_mass(), 1.0, 1e-9);
  EXPECT_NEAR(cdf(r.aoi, 0.0), 0.0, 1e-12);
  EXPECT_NEAR(cdf(r.paoi, 0.0), 0.0, 1e-12);
  EXPECT_TRUE(validate(r.aoi).empty());
  EXPECT_TRUE(validate(r.paoi).empty());
  double prev_a = 0.0, prev_p = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double x = 0.1 * i * r.mean_paoi;
    const double fa = cdf(r.aoi, x), fp = cdf(r.paoi, x);
    EXPECT_GE(fa, prev_a - 1e-12);
    EXPECT_GE(fp, prev_p - 1e-12);
    prev_a = fa;
    prev_p = fp;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Bufferless
// ---------------------------------------------------------------------------

TEST(BuildBufferless, DimensionsAndStructure) {
  const BuiltModel m = build_bufferless({exponential(1.0), erlang(1.0, 2), 0.4});
  ASSERT_EQ(m.spec.size(), 6);
  EXPECT_LE(max_row_sum(m.spec.Q), 1e-12);
  EXPECT_LE(max_row_sum(m.spec.Qtilde), 1e-12);
  EXPECT_TRUE(m.spec.Q.row(5).isZero(0.0));
  EXPECT_EQ(m.spec.R(5), -1.0);
  EXPECT_EQ(m.spec.negative_count(), 1);
  EXPECT_TRUE(validate(m.spec).empty());
  expect_partition_covers(m.partition);
  EXPECT_EQ(m.partition.block("S1").size, 2);
  EXPECT_EQ(m.partition.block("S2").size, 1);
  EXPECT_EQ(m.partition.block("S3").size, 2);
  EXPECT_EQ(m.partition.block("S4").size, 1);
}

TEST(BuildBufferless, ZeroPreemptionRemovesPreemptionTerms) {
  const auto arrival = erlang(1.0, 2), service = fit_mean_scov(1.0, 4.0);
  const BuiltModel m = build_bufferless({arrival, service, 0.0});
  const auto& P = m.partition;
  const auto s1 = P.block("S1"), s3 = P.block("S3"), s4 = P.block("S4");
  EXPECT_TRUE(m.spec.Q.block(s1.begin, s4.begin, s1.size, 1).isZero(0.0));
  EXPECT_TRUE(m.spec.Q.block(s1.begin, s1.begin, s1.size, s1.size)
                  .isApprox(m.spec.Q.block(s3.begin, s3.begin, s3.size, s3.size), 0.0));
}

TEST(BuildBufferless, ErlangArrivalsOrderEleven) {
  // Exponential(0.5) service written with two identical phases (order 2).
  PhDistribution service;
  service.alpha = RowVector::Constant(2, 0.5);
  service.S = -0.5 * Matrix::Identity(2, 2);
  const BufferlessSpec spec{erlang(1.0, 2), service, 1.0};
  EXPECT_EQ(build_bufferless(spec).spec.size(), 11);
  EXPECT_NEAR(analyze_bufferless(spec).mean_aoi, 2.7500, 1e-10);
}

TEST(BuildBufferless, LexicographicProductIndex) {
  const BuiltModel m = build_bufferless({erlang(1.0, 2), erlang(1.0, 3), 0.0});
  EXPECT_EQ(m.partition.index("S1", 1, 2), m.partition.block("S1").begin + 5);
  EXPECT_THROW(m.partition.index("S1", 2, 0), DomainError);
  EXPECT_THROW(m.partition.block("S9"), DomainError);
}

TEST(BuildBufferless, InvalidSpecs) {
  EXPECT_THROW(build_bufferless({exponential(1.0), exponential(1.0), 1.5}), DomainError);
  PhDistribution bad = exponential(1.0);
  bad.alpha(0) = 0.5;
  bad.mass0 = 0.5;
  EXPECT_THROW(build_bufferless({bad, exponential(1.0), 0.0}), StructuralError);
  PhDistribution broken = exponential(1.0);
  broken.alpha = RowVector::Ones(2);
  EXPECT_THROW(build_bufferless({exponential(1.0), broken, 0.0}), StructuralError);
}

TEST(AnalyzeBufferless, TableOneRows) {
  const AgeResult a = analyze_bufferless({exponential(0.5), erlang(1.0, 2), 1.0});
  EXPECT_NEAR(a.mean_aoi, 3.1250, 1e-10);
  EXPECT_NEAR(a.second_aoi, 14.53125, 1e-9);
  const AgeResult b = analyze_bufferless({exponential(1.5), erlang(1.0, 4), 1.0});
  EXPECT_NEAR(b.mean_aoi, 2.3830, 5e-5);
  EXPECT_NEAR(b.second_aoi, 7.8910, 5e-5);
  EXPECT_NEAR(b.rho, 1.5, 1e-12);
  expect_proper(a);
  expect_proper(b);
}

TEST(AnalyzeBufferless, MM11ClosedForms) {
  // Known M/M/1/1 results: E[D] = 1/l + 2/m - 1/(l+m) without preemption and
  // 1/l + 1/m with preemption.
  const double l = 0.8, m = 1.3;
  EXPECT_NEAR(analyze_bufferless({exponential(l), exponential(m), 0.0}).mean_aoi,
              1 / l + 2 / m - 1 / (l + m), 1e-10);
  EXPECT_NEAR(analyze_bufferless({exponential(l), exponential(m), 1.0}).mean_aoi, 1 / l + 1 / m,
              1e-10);
}

TEST(AnalyzeBufferless, PaoiInsensitivity) {
  for (const double lambda : {0.5, 1.0, 2.0}) {
    for (const double s : {0.25, 1.0, 4.0}) {
      const double mu = 1.3;
      const AgeResult r = analyze_bufferless({exponential(lambda), fit_mean_scov(1 / mu, s), 0.0});
      EXPECT_NEAR(r.mean_paoi, 1 / lambda + 2 / mu, 1e-8) << lambda << " " << s;
    }
  }
}

TEST(AnalyzeBufferless, ResetRateInvariance) {
  const BufferlessSpec spec{erlang(1.0, 2), fit_mean_scov(0.7, 2.0), 0.35};
  const AgeResult r1 = analyze_bufferless(spec, {}, 1.0);
  const AgeResult r10 = analyze_bufferless(spec, {}, 10.0);
  EXPECT_LE(cdf_gap(r1.aoi, r10.aoi, 10.0), 1e-9);
  EXPECT_LE(cdf_gap(r1.paoi, r10.paoi, 10.0), 1e-9);
  EXPECT_NEAR(r1.mean_aoi, r10.mean_aoi, 1e-9);
}

TEST(AnalyzeBufferless, ContinuityNearZeroPreemption) {
  const auto service = fit_mean_scov(1.2, 0.4);
  const double at0 = analyze_bufferless({exponential(1.0), service, 0.0}).mean_aoi;
  const double eps = analyze_bufferless({exponential(1.0), service, 1e-9}).mean_aoi;
  EXPECT_NEAR(at0, eps, 1e-6);
}

TEST(AnalyzeBufferless, ProperDistributionsAcrossGrid) {
  for (const double p : {0.0, 0.5, 1.0}) {
    for (const double s : {0.25, 4.0}) {
      expect_proper(analyze_bufferless({fit_mean_scov(1.0, 2.0), fit_mean_scov(1.25, s), p}));
    }
  }
}

TEST(AgeViolation, Basics) {
  const AgeResult r = analyze_bufferless({exponential(1.0), erlang(1.0, 2), 0.5});
  EXPECT_NEAR(age_violation(r.aoi, 0.0), 1.0, 1e-12);
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double g = age_violation(r.aoi, 0.1 * i);
    EXPECT_LE(g, prev + 1e-12);
    prev = g;
  }
  EXPECT_THROW(age_violation(r.aoi, -1.0), DomainError);
}

// ---------------------------------------------------------------------------
// Residual-service process and wait time
// ---------------------------------------------------------------------------

TEST(ResidualProcess, Structure) {
  const BuiltModel m = build_residual_process(0.5, erlang(1.0, 2));
  ASSERT_EQ(m.spec.size(), 4);
  EXPECT_EQ(m.spec.negative_count(), 2);
  EXPECT_EQ(m.spec.positive_count(), 2);
  EXPECT_LE(max_row_sum(m.spec.Q), 1e-12);
  EXPECT_LE(max_row_sum(m.spec.Qtilde), 1e-12);
  const SteadyState ss = solve(m.spec);
  EXPECT_EQ(ss.diagnostics.reducer, Reducer::Schur);
  EXPECT_NEAR(ss.total_mass(), 1.0, 1e-9);
}

TEST(ResidualProcess, IdleMassMatchesRenewalOracle) {
  const oracle::ResidualServiceClosedForm rc{0.6, 1.4};
  const BuiltModel m = build_residual_process(rc.lambda, exponential(rc.mu));
  const SteadyState ss = solve(m.spec);
  EXPECT_NEAR(ss.c(m.partition.block("0").begin), rc.mass_at_zero(1), 1e-12);
  EXPECT_NEAR(ss.c(m.partition.block("1").begin), rc.mass_at_zero(2), 1e-12);
  for (const double x : {0.2, 1.0, 3.0}) {
    EXPECT_NEAR(ss.density(m.partition.block("S1").begin, x), rc.density(0, x), 1e-12);
  }
}

TEST(ResidualProcess, InvalidInputs) {
  EXPECT_THROW(build_residual_process(0.0, exponential(1.0)), DomainError);
  PhDistribution bad = exponential(1.0);
  bad.alpha = RowVector::Ones(3);
  EXPECT_THROW(build_residual_process(1.0, bad), StructuralError);
}

TEST(WaitTime, MM12ClosedForm) {
  for (const double r : {0.0, 0.25, 1.0}) {
    const oracle::MM12WaitClosedForm wc{0.7, 1.3, r};
    const WaitTime w = wait_time_distribution(wc.lambda, exponential(wc.mu), r);
    EXPECT_NEAR(w.distribution.mass0, wc.mass_at_zero(), 1e-12);
    EXPECT_NEAR(form_moment(w.form, 1), wc.mean(), 1e-12);
    for (const double x : {0.1, 1.0, 4.0}) EXPECT_NEAR(pdf(w.distribution, x), wc.density(x), 1e-12);
  }
}

TEST(WaitTime, ZeroReplacementUsesOnlyEmptyQueueBoundary) {
  const auto service = erlang(1.0, 3);
  const BuiltModel m = build_residual_process(0.9, service);
  const SteadyState ss = solve(m.spec);
  const WaitTime w = wait_time_distribution(0.9, service, 0.0);
  const Eigen::Index i0 = m.partition.block("0").begin;
  const double eta = 1.0 / (ss.c(i0) + ss.state_integrals()(i0));
  EXPECT_NEAR(w.distribution.mass0, eta * ss.c(i0), 1e-12);
  for (const double x : {0.3, 1.5}) EXPECT_NEAR(pdf(w.distribution, x), eta * ss.density(i0, x), 1e-12);
}

TEST(WaitTime, Normalized) {
  for (const double r : {0.0, 0.5, 1.0}) {
    const WaitTime w = wait_time_distribution(1.2, fit_mean_scov(0.9, 3.0), r);
    EXPECT_NEAR(w.form.total_mass(), 1.0, 1e-9);
    EXPECT_TRUE(validate(w.distribution).empty());
  }
  EXPECT_THROW(wait_time_distribution(1.0, exponential(1.0), 1.5), DomainError);
}

TEST(WaitTime, MeanMatchesSimulation) {
  const auto service = erlang(1.0, 2);
  const WaitTime w = wait_time_distribution(0.5, service, 1.0);
  SimConfig cfg;
  cfg.model = Discipline::SingleBuffer;
  cfg.arrival = exponential(0.5);
  cfg.service = service;
  cfg.prob = 1.0;
  cfg.seed = 5;
  const SimResult sim = simulate(cfg);
  EXPECT_NEAR(sim.mean_wait.value, form_moment(w.form, 1), 3 * sim.mean_wait.std_error);
}

// ---------------------------------------------------------------------------
// Single buffer
// ---------------------------------------------------------------------------

TEST(BuildSingleBuffer, Structure) {
  const SingleBufferSpec spec{0.5, erlang(1.0, 2), 1.0};
  const WaitTime w = wait_time_distribution(spec.lambda, spec.service, spec.r);
  const BuiltModel m = build_single_buffer(spec, w.distribution);
  ASSERT_EQ(m.spec.size(), 10);
  EXPECT_LE(max_row_sum(m.spec.Q), 1e-12);
  EXPECT_LE(max_row_sum(m.spec.Qtilde), 1e-12);
  EXPECT_TRUE(m.spec.Q.row(9).isZero(0.0));
  expect_partition_covers(m.partition);
  for (const char* label : {"S1", "S2", "S3", "S5"}) EXPECT_EQ(m.partition.block(label).size, 2);
  EXPECT_EQ(m.partition.block("S4").size, 1);
  EXPECT_EQ(m.partition.block("S6").size, 1);
}

TEST(BuildSingleBuffer, SameTopologyForAnyReplacement) {
  const auto service = erlang(1.0, 2);
  std::set<std::pair<int, int>> pattern0, pattern1;
  for (const double r : {0.0, 1.0}) {
    const SingleBufferSpec spec{0.5, service, r};
    const BuiltModel m = build_single_buffer(spec, wait_time_distribution(0.5, service, r).distribution);
    auto& pat = r == 0.0 ? pattern0 : pattern1;
    for (const auto& b : m.partition.blocks()) {
      for (const auto& c : m.partition.blocks()) {
        if (!m.spec.Q.block(b.begin, c.begin, b.size, c.size).isZero(0.0)) {
          pat.insert({static_cast<int>(b.begin), static_cast<int>(c.begin)});
        }
      }
    }
  }
  EXPECT_EQ(pattern0, pattern1);
}

TEST(BuildSingleBuffer, OrderMismatch) {
  const SingleBufferSpec spec{0.5, erlang(1.0, 2), 0.0};
  EXPECT_THROW(build_single_buffer(spec, MeDistribution(exponential(1.0))), StructuralError);
}

TEST(AnalyzeSingleBuffer, TableOneRows) {
  EXPECT_NEAR(analyze_single_buffer({0.5, erlang(1.0, 2), 1.0}).mean_aoi, 3.1089, 5e-5);
  EXPECT_NEAR(analyze_single_buffer({1.5, erlang(1.0, 2), 1.0}).mean_aoi, 2.0996, 5e-5);
  EXPECT_NEAR(analyze_single_buffer({1.5, erlang(1.0, 4), 1.0}).mean_aoi, 2.0226, 5e-5);
}

TEST(AnalyzeSingleBuffer, ReplacementHelps) {
  for (const double s : {0.25, 1.0, 4.0}) {
    const auto service = fit_mean_scov(1.0, s);
    const AgeResult r0 = analyze_single_buffer({0.5, service, 0.0});
    const AgeResult r1 = analyze_single_buffer({0.5, service, 1.0});
    EXPECT_LE(r1.mean_aoi, r0.mean_aoi) << "scov=" << s;
    ASSERT_TRUE(r1.wait.has_value());
    expect_proper(r0);
    expect_proper(r1);
  }
}

TEST(AnalyzeSingleBuffer, ResetRateInvarianceAndContinuity) {
  const SingleBufferSpec spec{0.8, fit_mean_scov(1.0, 0.5), 0.6};
  const AgeResult a = analyze_single_buffer(spec, {}, 1.0);
  const AgeResult b = analyze_single_buffer(spec, {}, 10.0);
  EXPECT_LE(cdf_gap(a.aoi, b.aoi, 12.0), 1e-9);
  EXPECT_LE(cdf_gap(a.paoi, b.paoi, 12.0), 1e-9);

  const SingleBufferSpec zero{0.8, fit_mean_scov(1.0, 0.5), 0.0};
  SingleBufferSpec tiny = zero;
  tiny.r = 1e-9;
  EXPECT_NEAR(analyze_single_buffer(zero).mean_aoi, analyze_single_buffer(tiny).mean_aoi, 1e-6);
}

TEST(Analyze, VariantDispatch) {
  const ModelSpec b = BufferlessSpec{exponential(0.5), erlang(1.0, 2), 1.0};
  const ModelSpec s = SingleBufferSpec{0.5, erlang(1.0, 2), 1.0};
  EXPECT_NEAR(analyze(b).mean_aoi, 3.125, 1e-10);
  EXPECT_FALSE(analyze(b).wait.has_value());
  EXPECT_NEAR(analyze(s).mean_aoi, 3.1089, 5e-5);
  EXPECT_TRUE(analyze(s).wait.has_value());
}

TEST(Analyze, AgeViolationMatchesSimulationFig9) {
  const BufferlessSpec spec{erlang(1.0 / 0.45, 2), erlang(1.0, 100), 0.0};
  const AgeResult an = analyze_bufferless(spec);
  SimConfig cfg;
  cfg.arrival = spec.arrival;
  cfg.service = spec.service;
  cfg.cycles = 200'000;
  cfg.seed = 9;
  const SimResult sim = simulate(cfg);
  for (const double x : {2.0, 4.0, 6.0, 8.0, 10.0}) {
    EXPECT_NEAR(age_violation(an.aoi, x), 1.0 - empirical_aoi_cdf(sim, x), 0.01) << "x=" << x;
  }
}
