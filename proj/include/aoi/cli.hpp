#pragma once

// Command implementations behind the `aoi` executable. Argument parsing lives
// in tools/aoi_cli.cpp; everything here is callable from tests.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/io.hpp"
#include "aoi/models.hpp"
#include "aoi/parallel.hpp"
#include "aoi/simulator.hpp"
#include "aoi/validation.hpp"

namespace aoi::cli {

enum ExitCode : int { Ok = 0, Usage = 1, Numerical = 2, ValidationFailed = 3 };

struct SweepSpec {
  std::string parameter;  // p, r, rho, scov_theta, scov_lambda
  std::vector<double> values;
};

struct RunConfig {
  ModelConfig model;
  std::filesystem::path out = ".";
  std::optional<GridSpec> grid;  // default: 0 .. 5 E[Phi], 101 points
  std::optional<SweepSpec> sweep;
  std::uint64_t seed = 1;
  std::int64_t cycles = 1'000'000;
  std::int64_t warmup = 1'000;
  unsigned jobs = default_jobs();
  int thin = 0;  // simulate: keep every thin-th PAoI sample (0: none)
};

/// "name=v1,v2,..." or "name=start:stop:count".
inline SweepSpec sweep_from(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep: expected name=values, got \"" + text + "\"");
  SweepSpec s;
  s.parameter = text.substr(0, eq);
  static const std::vector<std::string> known{"p", "r", "rho", "scov_theta", "scov_lambda"};
  if (std::find(known.begin(), known.end(), s.parameter) == known.end()) {
    throw ConfigError("sweep: unknown parameter \"" + s.parameter +
                      "\" (expected p, r, rho, scov_theta or scov_lambda)");
  }
  const std::string list = text.substr(eq + 1);
  try {
    if (list.find(':') != std::string::npos) {
      const GridSpec g = grid_from(list);
      s.values = g.values();
    } else {
      std::stringstream ss(list);
      for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) s.values.push_back(std::stod(item));
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("sweep: could not parse values \"" + list + "\"");
  }
  if (s.values.empty()) throw ConfigError("sweep: empty value list");
  return s;
}

/// The model with one sweep parameter replaced; rejects values outside the
/// parameter's domain and parameters that do not apply to the model.
inline ModelConfig with_parameter(ModelConfig m, const std::string& name, double v) {
  const bool bufferless = m.kind == ModelKind::Bufferless;
  if (name == "p" || name == "r") {
    if ((name == "p") != bufferless) {
      throw ConfigError("sweep: parameter " + name + " does not apply to the " +
                        to_string(m.kind) + " model");
    }
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("sweep: " + name + " must lie in [0,1]");
    (bufferless ? m.p : m.r) = v;
    return m;
  }
  if (!(v > 0.0)) throw ConfigError("sweep: " + name + " must be positive");
  if (name == "rho" || name == "scov_theta") {
    if (m.service) throw ConfigError("sweep: " + name + " needs a parametric service law");
    (name == "rho" ? m.rho : m.scov_theta) = v;
  } else {
    if (!bufferless) throw ConfigError("sweep: scov_lambda needs the bufferless model");
    if (m.arrival) throw ConfigError("sweep: scov_lambda needs a parametric arrival law");
    m.scov_lambda = v;
  }
  return m;
}

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("out: cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
}

inline void write_table(const std::filesystem::path& path, const CsvTable& t) {
  std::ostringstream os;
  write_csv(os, t);
  write_text(path, os.str());
}

inline GridSpec grid_or_default(const RunConfig& cfg, double mean) {
  if (cfg.grid) return *cfg.grid;
  GridSpec g;
  g.x_max = 5.0 * mean;
  return g;
}

inline SimConfig sim_config(const RunConfig& cfg) {
  SimConfig s;
  s.model = cfg.model.kind == ModelKind::Bufferless ? Discipline::Bufferless
                                                    : Discipline::SingleBuffer;
  s.arrival = cfg.model.kind == ModelKind::Bufferless ? cfg.model.arrival_law()
                                                      : exponential(cfg.model.lambda);
  s.service = cfg.model.service_law();
  s.prob = cfg.model.probability();
  s.cycles = cfg.cycles;
  s.warmup = cfg.warmup;
  s.seed = cfg.seed;
  return s;
}

inline json estimate_json(const Estimate& e) {
  return json{{"value", e.value}, {"std_error", e.std_error}};
}

}  // namespace detail

/// Writes result.json, aoi.csv and paoi.csv into cfg.out.
inline AgeResult run_solve(const RunConfig& cfg) {
  const AgeResult res = analyze(cfg.model.spec());
  detail::ensure_dir(cfg.out);
  json doc = to_json(res);
  doc["config"] = to_json(cfg.model);
  detail::write_text(cfg.out / "result.json", doc.dump(2) + "\n");
  const GridSpec grid = detail::grid_or_default(cfg, res.mean_paoi);
  const auto xs = grid.values();
  detail::write_table(cfg.out / "aoi.csv", density_table(res.aoi, xs));
  detail::write_table(cfg.out / "paoi.csv", density_table(res.paoi, xs));
  return res;
}

/// Writes sim.json, aoi_cdf.csv, paoi_cdf.csv and, with thin > 0,
/// paoi_samples.csv into cfg.out.
inline SimResult run_simulate(const RunConfig& cfg) {
  const SimResult res = simulate(detail::sim_config(cfg));
  detail::ensure_dir(cfg.out);
  json doc;
  doc["config"] = to_json(cfg.model);
  doc["seed"] = cfg.seed;
  doc["cycles"] = cfg.cycles;
  doc["warmup"] = cfg.warmup;
  doc["mean_aoi"] = detail::estimate_json(res.mean_aoi);
  doc["second_moment_aoi"] = detail::estimate_json(res.second_aoi);
  doc["mean_paoi"] = detail::estimate_json(res.mean_paoi);
  doc["second_moment_paoi"] = detail::estimate_json(res.second_paoi);
  if (cfg.model.kind == ModelKind::SingleBuffer) {
    doc["mean_wait"] = detail::estimate_json(res.mean_wait);
  }
  doc["counts"] = json{{"arrivals", res.counts.arrivals},   {"successful", res.counts.successful},
                       {"preempted", res.counts.preempted}, {"replaced", res.counts.replaced},
                       {"dropped", res.counts.dropped},     {"in_flight", res.counts.in_flight}};
  detail::write_text(cfg.out / "sim.json", doc.dump(2) + "\n");

  const GridSpec grid = detail::grid_or_default(cfg, res.mean_paoi.value);
  const auto xs = grid.values();
  CsvTable aoi{{"x", "cdf"}, {xs, {}}};
  CsvTable paoi{{"x", "cdf"}, {xs, {}}};
  for (const double x : xs) {
    aoi.columns[1].push_back(empirical_aoi_cdf(res, x));
    paoi.columns[1].push_back(empirical_paoi_cdf(res, x));
  }
  detail::write_table(cfg.out / "aoi_cdf.csv", aoi);
  detail::write_table(cfg.out / "paoi_cdf.csv", paoi);
  if (cfg.thin > 0) {
    CsvTable samples{{"paoi"}, {{}}};
    for (std::size_t i = 0; i < res.peaks.size(); i += static_cast<std::size_t>(cfg.thin)) {
      samples.columns[0].push_back(res.peaks[i]);
    }
    detail::write_table(cfg.out / "paoi_samples.csv", samples);
  }
  return res;
}

struct SweepRow {
  double value = 0.0;
  std::optional<AgeResult> result;
  std::string error;
};

/// Solves every sweep point (in parallel), writes sweep.csv in input order
/// and returns the rows. Failed points carry an error message and appear in
/// the CSV with the token "error".
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
  if (!cfg.sweep || cfg.sweep->values.empty()) throw ConfigError("sweep: empty value list");
  const SweepSpec& sw = *cfg.sweep;
  // Domain errors are usage errors and are raised before any work starts.
  std::vector<ModelConfig> models;
  for (const double v : sw.values) models.push_back(with_parameter(cfg.model, sw.parameter, v));

  std::vector<SweepRow> rows(models.size());
  parallel_for(models.size(), cfg.jobs, [&](std::size_t i) {
    rows[i].value = sw.values[i];
    try {
      rows[i].result = analyze(models[i].spec());
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });

  std::ostringstream os;
  os << sw.parameter << ",mean_aoi,mean_paoi\n";
  for (const auto& r : rows) {
    os << format_g6(r.value) << ',';
    if (r.result) {
      os << format_g6(r.result->mean_aoi) << ',' << format_g6(r.result->mean_paoi) << '\n';
    } else {
      os << "error,error\n";
    }
  }
  detail::ensure_dir(cfg.out);
  detail::write_text(cfg.out / "sweep.csv", os.str());
  return rows;
}

/// Runs the acceptance suite and prints one line per check.
inline validation::Report run_validate(const validation::Options& opt, std::ostream& os) {
  validation::Report report = validation::run(opt);
  for (const auto& c : report.checks) validation::print(os, c);
  validation::print_summary(os, report);
  return report;
}

/// Maps an exception escaping a command to an exit code and prints it.
inline int report_error(const std::exception& e, std::ostream& err) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const StructuralError*>(&e) || dynamic_cast<const json::exception*>(&e)) {
    err << "usage error: " << e.what() << '\n';
    return Usage;
  }
  err << "numerical failure: " << e.what() << '\n';
  if (const auto* inst = dynamic_cast<const ModelInstabilityError*>(&e)) {
    err << "  expected " << inst->expected << " anti-stable eigenvalues, found " << inst->found
        << '\n';
  }
  if (const auto* num = dynamic_cast<const NumericalError*>(&e)) {
    err << "  condition estimate " << num->condition << '\n';
  }
  return Numerical;
}

}  // namespace aoi::cli
