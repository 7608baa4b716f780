#pragma once

// Acceptance suite shared by `aoi validate` and the acceptance test binary.
// Every check reports expected/actual/tolerance and its own runtime.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "aoi/mfq.hpp"
#include "aoi/models.hpp"
#include "aoi/parallel.hpp"
#include "aoi/phdist.hpp"
#include "aoi/simulator.hpp"
#include "aoi/testing/oracles.hpp"

namespace aoi::validation {

struct Check {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  // Non-empty when a failure is a documented deviation rather than a defect.
  std::string known_deviation;
};

struct Options {
  double tolerance_scale = 1.0;  // test hook: < 1 tightens every tolerance
  std::int64_t cycles = 1'000'000;
  std::uint64_t seed = 20200901;
  unsigned jobs = default_jobs();
  std::set<int> criteria;  // empty runs all; 9 = figure spot-checks
};

struct Report {
  std::vector<Check> checks;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
  }
  bool all_passed() const { return failures() == 0; }
  // True when every failure is a documented deviation.
  bool passed_except_known() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const Check& c) { return c.passed || !c.known_deviation.empty(); });
  }
};

inline std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

inline void print(std::ostream& os, const Check& c) {
  char time[32];
  std::snprintf(time, sizeof time, "%.3f s", c.seconds);
  os << (c.passed ? "PASS " : "FAIL ") << c.id << "  " << c.title << "  | " << c.detail << "  | "
     << time << '\n';
  if (!c.passed && !c.known_deviation.empty()) {
    os << "     known deviation: " << c.known_deviation << '\n';
  }
}

inline void print_summary(std::ostream& os, const Report& r) {
  double total = 0.0;
  for (const auto& c : r.checks) total += c.seconds;
  os << r.checks.size() - r.failures() << "/" << r.checks.size() << " checks passed";
  if (!r.all_passed()) {
    os << " (" << r.failures() << " failed"
       << (r.passed_except_known() ? ", all documented deviations" : "") << ")";
  }
  os << ", " << fmt(total, 1) << " s total\n";
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct StructuralProbe {
  double orthogonality = 0.0;
  double block_residual = 0.0;
  int solves = 0;
};

class Suite {
public:
  explicit Suite(const Options& opt) : opt_(opt) {}

  bool wants(int criterion) const {
    return opt_.criteria.empty() || opt_.criteria.count(criterion) > 0;
  }

  double tol(double base) const { return base * opt_.tolerance_scale; }

  // Every analytic solve in criteria 1-5 goes through here so criterion 6 can
  // audit total probability and solver structure over the same models.
  AgeResult analyze(const ModelSpec& spec) {
    AgeResult res = aoi::analyze(spec);
    std::lock_guard<std::mutex> lock(mu_);
    max_mass_error_ = std::max(max_mass_error_, res.mass_error);
    ++analyses_;
    solved_.push_back(spec);
    return res;
  }

  template <class Fn>
  Check timed(std::string id, std::string title, Fn&& fn) {
    Check c;
    c.id = std::move(id);
    c.title = std::move(title);
    const auto t0 = Clock::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = seconds_since(t0);
    return c;
  }

  void add(Check c) { report_.checks.push_back(std::move(c)); }

  Report& report() { return report_; }
  const Options& options() const { return opt_; }
  double max_mass_error() const { return max_mass_error_; }
  int analyses() const { return analyses_; }
  const std::vector<ModelSpec>& solved() const { return solved_; }

private:
  Options opt_;
  Report report_;
  std::mutex mu_;
  double max_mass_error_ = 0.0;
  int analyses_ = 0;
  std::vector<ModelSpec> solved_;
};

// ---------------------------------------------------------------------------
// 1. Table-1 reproduction
// ---------------------------------------------------------------------------

struct TableRow {
  std::string label;
  ModelSpec spec;
  double mean;
  std::optional<double> second;
};

inline std::vector<TableRow> table_rows() {
  std::vector<TableRow> rows;
  const auto e12 = erlang(1.0, 2), e14 = erlang(1.0, 4);
  rows.push_back({"M/PH/1/1* lambda=0.5 E(1,2)", BufferlessSpec{exponential(0.5), e12, 1.0}, 3.1250, 14.5312});
  rows.push_back({"M/PH/1/1* lambda=0.5 E(1,4)", BufferlessSpec{exponential(0.5), e14, 1.0}, 3.2036, 14.8310});
  rows.push_back({"M/PH/1/1* lambda=1.5 E(1,2)", BufferlessSpec{exponential(1.5), e12, 1.0}, 2.0417, 6.0035});
  rows.push_back({"M/PH/1/1* lambda=1.5 E(1,4)", BufferlessSpec{exponential(1.5), e14, 1.0}, 2.3830, 7.8910});
  rows.push_back({"PH/M/1/1* mu=0.5 E(1,2)", BufferlessSpec{e12, exponential(0.5), 1.0}, 2.7500, 12.0000});
  rows.push_back({"PH/M/1/1* mu=1.5 E(1,2)", BufferlessSpec{e12, exponential(1.5), 1.0}, 1.4167, 2.8889});
  rows.push_back({"PH/M/1/1* mu=0.5 E(1,4)", BufferlessSpec{e14, exponential(0.5), 1.0}, 2.6250, 11.1250});
  rows.push_back({"PH/M/1/1* mu=1.5 E(1,4)", BufferlessSpec{e14, exponential(1.5), 1.0}, 1.2917, 2.3472});
  rows.push_back({"M/PH/1/2* lambda=0.5 E(1,2)", SingleBufferSpec{0.5, e12, 1.0}, 3.1089, std::nullopt});
  rows.push_back({"M/PH/1/2* lambda=0.5 E(1,4)", SingleBufferSpec{0.5, e14, 1.0}, 3.0786, std::nullopt});
  rows.push_back({"M/PH/1/2* lambda=1.5 E(1,2)", SingleBufferSpec{1.5, e12, 1.0}, 2.0996, std::nullopt});
  rows.push_back({"M/PH/1/2* lambda=1.5 E(1,4)", SingleBufferSpec{1.5, e14, 1.0}, 2.0226, std::nullopt});
  return rows;
}

inline void criterion_table(Suite& s) {
  // Values are tabulated to 4 fractional digits; an exact tie such as
  // 14.53125 -> 14.5312 is accepted.
  const double tol = s.tol(0.5e-4 * (1.0 + 1e-8));
  int k = 0;
  for (const auto& row : table_rows()) {
    ++k;
    s.add(s.timed("1." + std::to_string(k), "Table 1 " + row.label, [&](Check& c) {
      const auto t0 = Clock::now();
      const AgeResult res = s.analyze(row.spec);
      const double dt = seconds_since(t0);
      bool ok = std::abs(res.mean_aoi - row.mean) <= tol;
      c.detail = "E[D]=" + fmt(res.mean_aoi) + " expected " + fmt(row.mean, 4);
      if (row.second) {
        ok = ok && std::abs(res.second_aoi - *row.second) <= tol;
        c.detail += ", E[D^2]=" + fmt(res.second_aoi) + " expected " + fmt(*row.second, 4);
      }
      c.detail += ", tol " + sci(tol) + ", solve " + fmt(dt, 3) + " s (limit 1 s)";
      c.passed = ok && dt <= 1.0;
    }));
  }
}

// ---------------------------------------------------------------------------
// 2-3. Simulation cross-validation
// ---------------------------------------------------------------------------

struct SimScenario {
  std::string label;
  Discipline discipline;
  PhDistribution arrival;
  PhDistribution service;
  double prob;
};

inline ModelSpec model_of(const SimScenario& sc) {
  if (sc.discipline == Discipline::Bufferless) {
    return BufferlessSpec{sc.arrival, sc.service, sc.prob};
  }
  return SingleBufferSpec{1.0 / moment(sc.arrival, 1), sc.service, sc.prob};
}

/// sup over 50 points on (0, 4 E] of |analytic - empirical| for AoI and PAoI.
inline std::pair<double, double> sup_distances(const AgeResult& an, const SimResult& sim) {
  double aoi = 0.0, paoi = 0.0;
  for (int i = 1; i <= 50; ++i) {
    const double x = 4.0 * an.mean_aoi * i / 50.0;
    const double y = 4.0 * an.mean_paoi * i / 50.0;
    aoi = std::max(aoi, std::abs(cdf(an.aoi, x) - empirical_aoi_cdf(sim, x)));
    paoi = std::max(paoi, std::abs(cdf(an.paoi, y) - empirical_paoi_cdf(sim, y)));
  }
  return {aoi, paoi};
}

inline void run_scenarios(Suite& s, int criterion, const std::vector<SimScenario>& scenarios) {
  const double tol = s.tol(0.005);
  const auto& opt = s.options();
  std::vector<Check> out(scenarios.size());
  parallel_for(scenarios.size(), opt.jobs, [&](std::size_t i) {
    const auto& sc = scenarios[i];
    out[i] = s.timed(std::to_string(criterion) + "." + std::to_string(i + 1), sc.label,
                     [&](Check& c) {
                       const AgeResult an = s.analyze(model_of(sc));
                       SimConfig cfg;
                       cfg.model = sc.discipline;
                       cfg.arrival = sc.arrival;
                       cfg.service = sc.service;
                       cfg.prob = sc.prob;
                       cfg.cycles = opt.cycles;
                       cfg.seed = opt.seed + 7919 * (100 * criterion + i);
                       const SimResult sim = simulate(cfg);
                       const auto [da, dp] = sup_distances(an, sim);
                       c.detail = "sup|F-F^| AoI " + sci(da) + ", PAoI " + sci(dp) + ", tol " +
                                  sci(tol) + ", cycles " + std::to_string(opt.cycles);
                       c.passed = da <= tol && dp <= tol;
                     });
  });
  for (auto& c : out) {
    c.passed = c.passed && c.seconds <= 60.0;
    s.add(std::move(c));
  }
}

inline void criterion_fig6(Suite& s) {
  std::vector<SimScenario> v;
  for (const double rho : {0.75, 1.25}) {
    for (const double scov : {0.25, 4.0}) {
      const auto service = fit_mean_scov(rho, scov);
      const std::string tag = " rho=" + fmt(rho, 2) + " scov=" + fmt(scov, 2);
      v.push_back({"M/PH/1/1" + tag, Discipline::Bufferless, exponential(1.0), service, 0.0});
      v.push_back({"M/PH/1/1*" + tag, Discipline::Bufferless, exponential(1.0), service, 1.0});
      v.push_back({"M/PH/1/2" + tag, Discipline::SingleBuffer, exponential(1.0), service, 0.0});
      v.push_back({"M/PH/1/2*" + tag, Discipline::SingleBuffer, exponential(1.0), service, 1.0});
    }
  }
  run_scenarios(s, 2, v);
}

inline void criterion_fig7(Suite& s) {
  std::vector<SimScenario> v;
  for (const double rho : {0.75, 1.25}) {
    for (const double scov_l : {0.25, 4.0}) {
      const auto arrival = fit_mean_scov(1.0, scov_l);
      const auto service = fit_mean_scov(rho, 0.2);
      const std::string tag = " rho=" + fmt(rho, 2) + " scovL=" + fmt(scov_l, 2) + " scovT=0.20";
      v.push_back({"PH/PH/1/1" + tag, Discipline::Bufferless, arrival, service, 0.0});
      v.push_back({"PH/PH/1/1*" + tag, Discipline::Bufferless, arrival, service, 1.0});
    }
  }
  run_scenarios(s, 3, v);
}

// ---------------------------------------------------------------------------
// 4. Insensitivity of E[Phi] in M/PH/1/1
// ---------------------------------------------------------------------------

inline void criterion_insensitivity(Suite& s) {
  const double tol = s.tol(1e-8);
  int k = 0;
  for (const double scov : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    ++k;
    s.add(s.timed("4." + std::to_string(k), "M/PH/1/1 E[Phi] insensitivity scov=" + fmt(scov, 2),
                  [&](Check& c) {
                    const auto res =
                        s.analyze(BufferlessSpec{exponential(1.0), fit_mean_scov(1.0, scov), 0.0});
                    const double err = std::abs(res.mean_paoi - 3.0);
                    c.detail = "E[Phi]=" + fmt(res.mean_paoi, 10) + " expected 3, |err| " +
                               sci(err) + ", tol " + sci(tol);
                    c.passed = err <= tol;
                  }));
  }
}

// ---------------------------------------------------------------------------
// 5. Optimal preemption / replacement
// ---------------------------------------------------------------------------

inline const char* interior_optimum_deviation() {
  return "at rho=2, scov=0.25 mean AoI increases monotonically in p (analysis and "
         "simulation agree), so p=0 is optimal; interior optima do occur elsewhere, e.g. "
         "rho=2, scov=0.5 (p*~0.4)";
}

inline void criterion_optimum(Suite& s) {
  const auto service = fit_mean_scov(2.0, 0.25);
  s.add(s.timed("5.1", "M/PH/1/1/P(p) rho=2 scov=0.25 interior optimum over p=0:0.05:1",
                [&](Check& c) {
                  std::vector<double> m;
                  for (int i = 0; i <= 20; ++i) {
                    m.push_back(s.analyze(BufferlessSpec{exponential(1.0), service, 0.05 * i}).mean_aoi);
                  }
                  const auto best = std::min_element(m.begin(), m.end());
                  const double p_star = 0.05 * static_cast<double>(best - m.begin());
                  c.passed = *best < m.front() && *best < m.back();
                  c.detail = "E[D](p=0)=" + fmt(m.front()) + ", E[D](p=1)=" + fmt(m.back()) +
                             ", min " + fmt(*best) + " at p=" + fmt(p_star, 2) +
                             "; expected min strictly below both endpoints";
                  c.known_deviation = interior_optimum_deviation();
                }));
  s.add(s.timed("5.2", "M/PH/1/2/R(r) rho=2 scov=0.25 r=1 minimal over r=0:0.1:1", [&](Check& c) {
    std::vector<double> m;
    for (int i = 0; i <= 10; ++i) {
      m.push_back(s.analyze(SingleBufferSpec{1.0, service, 0.1 * i}).mean_aoi);
    }
    const double others = *std::min_element(m.begin(), m.end() - 1);
    c.passed = m.back() <= others;
    c.detail = "E[D](r=1)=" + fmt(m.back()) + ", best other " + fmt(others) +
               ", E[D](r=0)=" + fmt(m.front());
  }));
}

// ---------------------------------------------------------------------------
// 6. Solver structure
// ---------------------------------------------------------------------------

inline StructuralProbe probe(const ModelSpec& spec) {
  StructuralProbe p;
  auto take = [&](const SteadyState& ss) {
    p.orthogonality = std::max(p.orthogonality, ss.diagnostics.orthogonality_error);
    p.block_residual = std::max(p.block_residual, ss.diagnostics.block_residual);
    ++p.solves;
  };
  if (const auto* b = std::get_if<BufferlessSpec>(&spec)) {
    take(solve(build_bufferless(*b).spec));
  } else {
    const auto& sb = std::get<SingleBufferSpec>(spec);
    take(solve(build_residual_process(sb.lambda, sb.service).spec));
    const WaitTime w = wait_time_distribution(sb.lambda, sb.service, sb.r);
    SolveOptions relaxed;
    relaxed.require_nonnegative_rates = false;
    take(solve(build_single_buffer(sb, w.distribution).spec, relaxed));
  }
  return p;
}

inline void criterion_structure(Suite& s) {
  if (s.solved().empty()) {
    for (const auto& row : table_rows()) s.analyze(row.spec);
  }
  const std::vector<ModelSpec> models = s.solved();

  StructuralProbe worst;
  const auto t0 = Clock::now();
  std::string probe_error;
  std::vector<StructuralProbe> probes(models.size());
  try {
    parallel_for(models.size(), s.options().jobs,
                 [&](std::size_t i) { probes[i] = probe(models[i]); });
  } catch (const std::exception& e) {
    probe_error = e.what();
  }
  for (const auto& p : probes) {
    worst.orthogonality = std::max(worst.orthogonality, p.orthogonality);
    worst.block_residual = std::max(worst.block_residual, p.block_residual);
    worst.solves += p.solves;
  }
  const double probe_seconds = seconds_since(t0);

  const double orth_tol = s.tol(1e-12);
  Check orth = s.timed("6.1", "orthogonality ||P^T P - I||", [&](Check& c) {
    c.passed = probe_error.empty() && worst.orthogonality <= orth_tol;
    c.detail = "max " + sci(worst.orthogonality) + " over " + std::to_string(worst.solves) +
               " solves, tol " + sci(orth_tol) + (probe_error.empty() ? "" : "; " + probe_error);
  });
  orth.seconds += probe_seconds;
  s.add(std::move(orth));

  const double block_tol = s.tol(1e-10);
  s.add(s.timed("6.2", "zero lower-left block of P^T K P (relative)", [&](Check& c) {
    c.passed = probe_error.empty() && worst.block_residual <= block_tol;
    c.detail = "max " + sci(worst.block_residual) + " over " + std::to_string(worst.solves) +
               " solves, tol " + sci(block_tol);
  }));

  const double agree_tol = s.tol(1e-9);
  s.add(s.timed("6.3", "Householder vs Schur densities on bufferless models", [&](Check& c) {
    double diff = 0.0;
    int compared = 0;
    for (const auto& m : models) {
      const auto* b = std::get_if<BufferlessSpec>(&m);
      if (!b) continue;
      const GmfqSpec spec = build_bufferless(*b).spec;
      const SteadyState hh = solve(spec, SolveOptions{Reducer::Householder});
      const SteadyState sc = solve(spec, SolveOptions{Reducer::Schur});
      for (int i = 0; i <= 20; ++i) {
        const double x = 0.5 * i;
        diff = std::max(diff, (hh.densities(x) - sc.densities(x)).cwiseAbs().maxCoeff());
      }
      diff = std::max(diff, (hh.c - sc.c).cwiseAbs().maxCoeff());
      ++compared;
    }
    c.passed = compared > 0 && diff <= agree_tol;
    c.detail = "max |f_H - f_S| " + sci(diff) + " over " + std::to_string(compared) +
               " models x 21 levels, tol " + sci(agree_tol);
  }));

  const double mass_tol = s.tol(1e-9);
  s.add(s.timed("6.4", "total probability on every solve in criteria 1-5", [&](Check& c) {
    c.passed = s.max_mass_error() <= mass_tol;
    c.detail = "max |mass-1| " + sci(s.max_mass_error()) + " over " +
               std::to_string(s.analyses()) + " analyses, tol " + sci(mass_tol);
  }));
}

// ---------------------------------------------------------------------------
// 7. Small-instance oracles
// ---------------------------------------------------------------------------

inline void criterion_oracles(Suite& s) {
  const double tol = s.tol(1e-8);
  s.add(s.timed("7.1", "on-off fluid queue (n=2) vs closed form", [&](Check& c) {
    const oracle::OnOffClosedForm oo{2.0, 1.0};
    const SteadyState ss = solve(oo.spec());
    double err = std::abs(ss.c(1) - oo.mass_at_zero()) + std::abs(ss.c(0));
    for (int i = 0; i <= 40; ++i) {
      const double x = 0.25 * i;
      err = std::max(err, std::abs(ss.density(0, x) - oo.density(x)));
      err = std::max(err, std::abs(ss.density(1, x) - oo.density(x)));
    }
    c.passed = err <= tol;
    c.detail = "max error " + sci(err) + ", tol " + sci(tol);
  }));

  s.add(s.timed("7.2", "M/M/1/2 residual-service process (l=1) vs renewal closed form",
                [&](Check& c) {
                  const oracle::ResidualServiceClosedForm rc{0.7, 1.3};
                  const BuiltModel b = build_residual_process(rc.lambda, exponential(rc.mu));
                  const SteadyState ss = solve(b.spec);
                  const Eigen::Index idx[3] = {b.partition.block("S1").begin,
                                               b.partition.block("0").begin,
                                               b.partition.block("1").begin};
                  double err = 0.0;
                  for (int st = 0; st < 3; ++st) {
                    err = std::max(err, std::abs(ss.c(idx[st]) - rc.mass_at_zero(st)));
                    for (int i = 0; i <= 40; ++i) {
                      const double x = 0.25 * i;
                      err = std::max(err, std::abs(ss.density(idx[st], x) - rc.density(st, x)));
                    }
                  }
                  c.passed = err <= tol;
                  c.detail = "max error " + sci(err) + ", tol " + sci(tol);
                }));

  s.add(s.timed("7.3", "M/M/1/2 waiting time vs closed form, r in {0, 0.5, 1}", [&](Check& c) {
    double err = 0.0;
    for (const double r : {0.0, 0.5, 1.0}) {
      const oracle::MM12WaitClosedForm wc{0.7, 1.3, r};
      const WaitTime w = wait_time_distribution(wc.lambda, exponential(wc.mu), r);
      err = std::max(err, std::abs(w.distribution.mass0 - wc.mass_at_zero()));
      err = std::max(err, std::abs(form_moment(w.form, 1) - wc.mean()));
      for (int i = 0; i <= 40; ++i) {
        const double x = 0.25 * i;
        err = std::max(err, std::abs(pdf(w.distribution, x) - wc.density(x)));
      }
    }
    c.passed = err <= tol;
    c.detail = "max error " + sci(err) + ", tol " + sci(tol);
  }));

  const double ctmc_tol = s.tol(5e-3);
  auto ctmc = [&](const std::string& id, const std::string& title, const GmfqSpec& spec) {
    s.add(s.timed(id, title, [&](Check& c) {
      const SteadyState ss = solve(spec);
      // Mean level sets the truncation point of the discretized chain.
      const RowVector gA = ss.A.transpose().partialPivLu().solve(ss.g.transpose()).transpose();
      const RowVector gA2 = ss.A.transpose().partialPivLu().solve(gA.transpose()).transpose();
      const double mean_level = (gA2 * ss.H).sum();
      const oracle::DiscretizedFluidQueue dq(spec, 1e-3, 40.0 * mean_level);
      double sup = 0.0;
      for (int k = 0; k <= 200; ++k) {
        const double x = 10.0 * mean_level * k / 200.0;
        sup = std::max(sup, (dq.cumulative(x) - ss.cumulative(x)).cwiseAbs().maxCoeff());
      }
      c.passed = sup <= ctmc_tol;
      c.detail = "n=" + std::to_string(spec.size()) + ", step 1e-3, " +
                 std::to_string(dq.levels()) + " levels, sup cdf distance " + sci(sup) +
                 ", tol " + sci(ctmc_tol);
    }));
  };
  ctmc("7.4", "discretized CTMC oracle: on-off (n=2)", oracle::OnOffClosedForm{2.0, 1.0}.spec());
  ctmc("7.5", "discretized CTMC oracle: M/E(1,2)/1/1* lambda=0.5 (n=6)",
       build_bufferless({exponential(0.5), erlang(1.0, 2), 1.0}).spec);
  ctmc("7.6", "discretized CTMC oracle: M/M/1/2 residual process (n=3)",
       build_residual_process(0.7, exponential(1.3)).spec);
}

// ---------------------------------------------------------------------------
// 8. Age violation, PH/D/1/1 approximated by Erlang-100 service
// ---------------------------------------------------------------------------

inline void criterion_violation(Suite& s) {
  const double tol = s.tol(0.01);
  s.add(s.timed("8.1", "G(x) E(1/0.45,2)/E(1,100)/1/1 vs simulation at x=2,4,6,8,10",
                [&](Check& c) {
                  const BufferlessSpec spec{erlang(1.0 / 0.45, 2), erlang(1.0, 100), 0.0};
                  const AgeResult an = aoi::analyze(spec);
                  SimConfig cfg;
                  cfg.arrival = spec.arrival;
                  cfg.service = spec.service;
                  cfg.cycles = s.options().cycles;
                  cfg.seed = s.options().seed + 88;
                  const SimResult sim = simulate(cfg);
                  double worst = 0.0;
                  std::string vals;
                  for (const double x : {2.0, 4.0, 6.0, 8.0, 10.0}) {
                    const double g = age_violation(an.aoi, x);
                    const double gs = 1.0 - empirical_aoi_cdf(sim, x);
                    worst = std::max(worst, std::abs(g - gs));
                    vals += (vals.empty() ? "" : " ") + fmt(g, 4) + "/" + fmt(gs, 4);
                  }
                  c.passed = worst <= tol;
                  c.detail = "analytic/sim " + vals + ", max diff " + sci(worst) + ", tol " +
                             sci(tol) + ", n=" + std::to_string(build_bufferless(spec).spec.size());
                }));
}

// ---------------------------------------------------------------------------
// 9. Figure spot-checks (Figs. 10 and 12)
// ---------------------------------------------------------------------------

inline void criterion_spot_checks(Suite& s) {
  s.add(s.timed("9.1", "Fig 10: M/PH/1/2* beats M/PH/1/2 (E[D] and E[Phi])", [&](Check& c) {
    int pairs = 0, wins = 0;
    for (const double rho : {0.5, 1.0, 1.5}) {
      for (const double scov : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const auto service = fit_mean_scov(rho, scov);
        const AgeResult r0 = aoi::analyze(SingleBufferSpec{1.0, service, 0.0});
        const AgeResult r1 = aoi::analyze(SingleBufferSpec{1.0, service, 1.0});
        ++pairs;
        if (r1.mean_aoi <= r0.mean_aoi && r1.mean_paoi <= r0.mean_paoi) ++wins;
      }
    }
    c.passed = wins == pairs;
    c.detail = std::to_string(wins) + "/" + std::to_string(pairs) +
               " (rho, scov) points with r=1 no worse, rho in {0.5,1,1.5}, scov in {0.25..4}";
  }));
  s.add(s.timed("9.2", "Fig 12: PH/PH/1/1 rho=1 mean AoI nondecreasing in scov_L", [&](Check& c) {
    int curves = 0, monotone = 0;
    for (const double scov_t : {0.25, 1.0, 2.0, 4.0}) {
      double prev = 0.0;
      bool ok = true;
      for (const double scov_l : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double m = aoi::analyze(BufferlessSpec{fit_mean_scov(1.0, scov_l),
                                                     fit_mean_scov(1.0, scov_t), 0.0})
                             .mean_aoi;
        ok = ok && m >= prev;
        prev = m;
      }
      ++curves;
      if (ok) ++monotone;
    }
    c.passed = monotone == curves;
    c.detail = std::to_string(monotone) + "/" + std::to_string(curves) +
               " curves monotone, scov_T in {0.25,1,2,4}, scov_L in {0.25..4}";
  }));
}

}  // namespace detail

/// Runs the selected criteria in order. Criterion 6 audits the models
/// solved by the criteria that ran before it.
inline Report run(const Options& opt = {}) {
  detail::Suite s(opt);
  if (s.wants(1)) detail::criterion_table(s);
  if (s.wants(2)) detail::criterion_fig6(s);
  if (s.wants(3)) detail::criterion_fig7(s);
  if (s.wants(4)) detail::criterion_insensitivity(s);
  if (s.wants(5)) detail::criterion_optimum(s);
  if (s.wants(6)) detail::criterion_structure(s);
  if (s.wants(7)) detail::criterion_oracles(s);
  if (s.wants(8)) detail::criterion_violation(s);
  if (s.wants(9)) detail::criterion_spot_checks(s);
  return std::move(s.report());
}

}  // namespace aoi::validation
