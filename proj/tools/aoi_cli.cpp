#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "aoi/cli.hpp"

namespace {

using aoi::json;

struct Flags {
  std::string model;
  std::string config;
  std::string out = ".";
  std::string grid;
  std::string sweep;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> cycles;
  std::optional<std::int64_t> warmup;
  unsigned jobs = aoi::default_jobs();
  int thin = 0;
  std::optional<double> lambda, rho, mu, scov_theta, scov_lambda, p, r;
  double tolerance_scale = 1.0;
  std::vector<int> criteria;
};

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw aoi::ConfigError("config: cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw aoi::ConfigError("config " + path + ": " + e.what());
  }
}

// Config file first, then --model (a kind name or inline JSON), then the
// individual parameter flags.
aoi::cli::RunConfig resolve(const Flags& f) {
  json doc = json::object();
  if (!f.config.empty()) doc = load_config(f.config);
  if (!f.model.empty()) {
    if (f.model.front() == '{') {
      try {
        doc.update(json::parse(f.model));
      } catch (const json::parse_error& e) {
        throw aoi::ConfigError(std::string("--model: ") + e.what());
      }
    } else {
      doc["model"] = f.model;
    }
  }
  auto set = [&](const char* key, const std::optional<double>& v) {
    if (v) doc[key] = *v;
  };
  set("lambda", f.lambda);
  if (f.rho) doc.erase("mu");
  if (f.mu) doc.erase("rho");
  set("rho", f.rho);
  set("mu", f.mu);
  set("scov_theta", f.scov_theta);
  set("scov_lambda", f.scov_lambda);
  set("p", f.p);
  set("r", f.r);

  aoi::cli::RunConfig cfg;
  cfg.model = aoi::model_config_from(doc);
  cfg.out = f.out;
  if (!f.grid.empty()) cfg.grid = aoi::grid_from(f.grid);
  if (!f.sweep.empty()) cfg.sweep = aoi::cli::sweep_from(f.sweep);
  if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("cycles")) cfg.cycles = doc.at("cycles").get<std::int64_t>();
  if (f.seed) cfg.seed = *f.seed;
  if (f.cycles) cfg.cycles = *f.cycles;
  if (f.warmup) cfg.warmup = *f.warmup;
  cfg.jobs = f.jobs;
  cfg.thin = f.thin;
  return cfg;
}

void add_model_flags(CLI::App* app, Flags& f) {
  app->add_option("--model", f.model, "bufferless | single_buffer, or an inline JSON model");
  app->add_option("--config", f.config, "JSON model file")->check(CLI::ExistingFile);
  app->add_option("--out", f.out, "output directory")->capture_default_str();
  app->add_option("--grid", f.grid, "xmin:xmax:points[:linear|log]");
  app->add_option("--lambda", f.lambda, "arrival rate");
  app->add_option("--rho", f.rho, "load, service mean = rho / lambda");
  app->add_option("--mu", f.mu, "service rate (alternative to --rho)");
  app->add_option("--scov-theta", f.scov_theta, "service-time scov");
  app->add_option("--scov-lambda", f.scov_lambda, "interarrival-time scov (bufferless)");
  app->add_option("-p,--preemption", f.p, "preemption probability (bufferless)");
  app->add_option("-r,--replacement", f.r, "replacement probability (single_buffer)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age of Information analysis for PH/PH/1/1/P(p) and M/PH/1/2/R(r) queues"};
  app.require_subcommand(1);
  Flags f;

  auto* solve = app.add_subcommand("solve", "analytic AoI/PAoI distributions");
  add_model_flags(solve, f);

  auto* simulate = app.add_subcommand("simulate", "discrete-event simulation");
  add_model_flags(simulate, f);
  simulate->add_option("--seed", f.seed, "random seed");
  simulate->add_option("--cycles", f.cycles, "retained AoI cycles (>= 10^4)");
  simulate->add_option("--warmup", f.warmup, "receptions discarded before recording");
  simulate->add_option("--thin", f.thin, "write every k-th PAoI sample (0: none)");

  auto* sweep = app.add_subcommand("sweep", "mean AoI/PAoI over one parameter");
  add_model_flags(sweep, f);
  sweep->add_option("--sweep", f.sweep, "name=v1,v2,... or name=start:stop:count")->required();
  sweep->add_option("--jobs", f.jobs, "worker threads")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "run the acceptance suite");
  validate->add_option("--seed", f.seed, "base simulation seed");
  validate->add_option("--cycles", f.cycles, "simulation cycles per scenario");
  validate->add_option("--jobs", f.jobs, "worker threads")->capture_default_str();
  validate->add_option("--tolerance-scale", f.tolerance_scale, "multiply every tolerance");
  validate->add_option("--criteria", f.criteria, "run only these criteria (1-9)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? aoi::cli::Ok : aoi::cli::Usage;
  }

  try {
    if (*validate) {
      aoi::validation::Options opt;
      opt.tolerance_scale = f.tolerance_scale;
      opt.jobs = f.jobs;
      if (f.seed) opt.seed = *f.seed;
      if (f.cycles) opt.cycles = *f.cycles;
      opt.criteria.insert(f.criteria.begin(), f.criteria.end());
      const auto report = aoi::cli::run_validate(opt, std::cout);
      return report.all_passed() ? aoi::cli::Ok : aoi::cli::ValidationFailed;
    }
    const aoi::cli::RunConfig cfg = resolve(f);
    if (*solve) {
      const auto res = aoi::cli::run_solve(cfg);
      std::cout << "mean_aoi " << aoi::validation::fmt(res.mean_aoi) << "  mean_paoi "
                << aoi::validation::fmt(res.mean_paoi) << "  -> " << cfg.out.string() << '\n';
    } else if (*simulate) {
      const auto res = aoi::cli::run_simulate(cfg);
      std::cout << "mean_aoi " << aoi::validation::fmt(res.mean_aoi.value) << " +- "
                << aoi::validation::fmt(res.mean_aoi.std_error) << "  mean_paoi "
                << aoi::validation::fmt(res.mean_paoi.value) << " +- "
                << aoi::validation::fmt(res.mean_paoi.std_error) << "  -> " << cfg.out.string()
                << '\n';
    } else {
      const auto rows = aoi::cli::run_sweep(cfg);
      int failed = 0;
      for (const auto& row : rows) {
        if (!row.result) {
          ++failed;
          std::cerr << "point " << cfg.sweep->parameter << "=" << row.value << ": " << row.error
                    << '\n';
        }
      }
      std::cout << rows.size() - failed << "/" << rows.size() << " points solved -> "
                << (cfg.out / "sweep.csv").string() << '\n';
      if (failed) return aoi::cli::Numerical;
    }
  } catch (const std::exception& e) {
    return aoi::cli::report_error(e, std::cerr);
  }
  return aoi::cli::Ok;
}
