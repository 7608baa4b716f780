#pragma once

// JSON and CSV surfaces: distribution and fluid-queue serialization, model
// configs for the CLI, result documents and x/pdf/cdf grids.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/mfq.hpp"
#include "aoi/models.hpp"
#include "aoi/phdist.hpp"

namespace aoi {

using json = nlohmann::json;

// A config error that names the offending field.
class ConfigError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Matrices and distributions
// ---------------------------------------------------------------------------

namespace io {

inline json to_json(const RowVector& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline json to_json(const Vector& v) { return to_json(RowVector(v.transpose())); }

inline json to_json(const Matrix& M) {
  json j = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) j.push_back(to_json(RowVector(M.row(r))));
  return j;
}

inline RowVector row_vector_from(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field + ": expected an array of numbers");
  RowVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "]: not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const RowVector row = row_vector_from(j[r], field + "[" + std::to_string(r) + "]");
    if (row.size() != cols) throw ConfigError(field + ": ragged matrix");
    M.row(r) = row;
  }
  return M;
}

template <MatrixExponentialLaw D>
json to_json(const D& d) {
  return json{{"alpha", to_json(RowVector(d.alpha))}, {"S", to_json(Matrix(d.S))},
              {"mass0", d.mass0}};
}

template <MatrixExponentialLaw D>
D distribution_from(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("alpha") || !j.contains("S")) {
    throw ConfigError(field + ": expected {alpha, S, mass0}");
  }
  D d;
  d.alpha = row_vector_from(j.at("alpha"), field + ".alpha");
  d.S = matrix_from(j.at("S"), field + ".S");
  d.mass0 = j.value("mass0", 0.0);
  if (d.S.rows() != d.S.cols() || d.alpha.size() != d.S.rows()) {
    throw ConfigError(field + ": alpha/S dimensions do not match");
  }
  return d;
}

/// Accepts explicit parameters {alpha, S, mass0} or one of the shorthands
/// {"exponential": rate}, {"erlang": {"mean", "order"}},
/// {"fit": {"mean", "scov"}}.
inline PhDistribution ph_from(const json& j, const std::string& field) {
  if (j.is_object() && j.contains("exponential")) {
    return exponential(j.at("exponential").get<double>());
  }
  if (j.is_object() && j.contains("erlang")) {
    const auto& e = j.at("erlang");
    return erlang(e.at("mean").get<double>(), e.at("order").get<int>());
  }
  if (j.is_object() && j.contains("fit")) {
    const auto& f = j.at("fit");
    return fit_mean_scov(f.at("mean").get<double>(), f.at("scov").get<double>());
  }
  PhDistribution d = distribution_from<PhDistribution>(j, field);
  const auto problems = validate(d);
  if (!problems.empty()) throw ConfigError(field + ": " + problems.front());
  return d;
}

inline json to_json(const GmfqSpec& s) {
  return json{{"Q", to_json(s.Q)}, {"Qtilde", to_json(s.Qtilde)}, {"R", to_json(s.R)}};
}

inline GmfqSpec gmfq_from(const json& j) {
  GmfqSpec s;
  s.Q = matrix_from(j.at("Q"), "Q");
  s.Qtilde = matrix_from(j.at("Qtilde"), "Qtilde");
  s.R = row_vector_from(j.at("R"), "R").transpose();
  return s;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

enum class ModelKind { Bufferless, SingleBuffer };

/// Model described either by explicit PH laws or by (lambda, rho, scov)
/// parameters that are turned into two-moment fits. Explicit laws win.
struct ModelConfig {
  ModelKind kind = ModelKind::Bufferless;
  double lambda = 1.0;
  double rho = 1.0;
  double scov_theta = 1.0;
  double scov_lambda = 1.0;
  double p = 0.0;
  double r = 0.0;
  std::optional<PhDistribution> arrival;  // bufferless only
  std::optional<PhDistribution> service;

  PhDistribution arrival_law() const {
    if (arrival) return *arrival;
    return fit_mean_scov(1.0 / lambda, scov_lambda);
  }
  PhDistribution service_law() const {
    if (service) return *service;
    return fit_mean_scov(rho / lambda, scov_theta);
  }

  ModelSpec spec() const {
    if (kind == ModelKind::Bufferless) return BufferlessSpec{arrival_law(), service_law(), p};
    return SingleBufferSpec{lambda, service_law(), r};
  }

  double probability() const { return kind == ModelKind::Bufferless ? p : r; }
};

inline const char* to_string(ModelKind k) {
  return k == ModelKind::Bufferless ? "bufferless" : "single_buffer";
}

inline ModelKind model_kind_from(const std::string& s) {
  if (s == "bufferless") return ModelKind::Bufferless;
  if (s == "single_buffer" || s == "single-buffer") return ModelKind::SingleBuffer;
  throw ConfigError("model: expected \"bufferless\" or \"single_buffer\", got \"" + s + "\"");
}

namespace detail {

inline double number_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
  return v.get<double>();
}

}  // namespace detail

/// Parses {model, arrival, service, p|r} plus the optional parametric keys
/// lambda, rho | mu, scov_theta, scov_lambda. For the single-buffer model the
/// arrival is a rate: a number or {"rate": x}.
inline ModelConfig model_config_from(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ModelConfig c;
  if (j.contains("model")) c.kind = model_kind_from(j.at("model").get<std::string>());
  if (j.contains("lambda")) c.lambda = detail::number_field(j, "lambda");
  if (j.contains("rho")) c.rho = detail::number_field(j, "rho");
  if (j.contains("mu")) c.rho = c.lambda / detail::number_field(j, "mu");
  if (j.contains("scov_theta")) c.scov_theta = detail::number_field(j, "scov_theta");
  if (j.contains("scov_lambda")) c.scov_lambda = detail::number_field(j, "scov_lambda");
  if (j.contains("p")) c.p = detail::number_field(j, "p");
  if (j.contains("r")) c.r = detail::number_field(j, "r");
  if (j.contains("arrival")) {
    const auto& a = j.at("arrival");
    if (c.kind == ModelKind::SingleBuffer) {
      if (a.is_number()) {
        c.lambda = a.get<double>();
      } else if (a.is_object() && a.contains("rate")) {
        c.lambda = a.at("rate").get<double>();
      } else {
        throw ConfigError("arrival: single_buffer model takes a Poisson rate");
      }
    } else {
      c.arrival = io::ph_from(a, "arrival");
      c.lambda = 1.0 / moment(*c.arrival, 1);
    }
  }
  if (j.contains("service")) c.service = io::ph_from(j.at("service"), "service");
  if (!(c.lambda > 0.0)) throw ConfigError("lambda: must be positive");
  if (!(c.rho > 0.0)) throw ConfigError("rho: must be positive");
  if (!(c.scov_theta > 0.0)) throw ConfigError("scov_theta: must be positive");
  if (!(c.scov_lambda > 0.0)) throw ConfigError("scov_lambda: must be positive");
  if (!(c.p >= 0.0 && c.p <= 1.0)) throw ConfigError("p: must lie in [0,1]");
  if (!(c.r >= 0.0 && c.r <= 1.0)) throw ConfigError("r: must lie in [0,1]");
  return c;
}

inline json to_json(const ModelConfig& c) {
  json j{{"model", to_string(c.kind)}, {"lambda", c.lambda}};
  if (c.kind == ModelKind::Bufferless) {
    j["arrival"] = io::to_json(c.arrival_law());
    j["p"] = c.p;
  } else {
    j["arrival"] = json{{"rate", c.lambda}};
    j["r"] = c.r;
  }
  j["service"] = io::to_json(c.service_law());
  return j;
}

inline json to_json(const AgeResult& res) {
  json j;
  j["rho"] = res.rho;
  j["mean_aoi"] = res.mean_aoi;
  j["second_moment_aoi"] = res.second_aoi;
  j["mean_paoi"] = res.mean_paoi;
  j["second_moment_paoi"] = res.second_paoi;
  j["aoi"] = io::to_json(res.aoi);
  j["paoi"] = io::to_json(res.paoi);
  if (res.wait) {
    j["mean_wait"] = res.mean_wait;
    j["second_moment_wait"] = res.second_wait;
    j["wait"] = io::to_json(*res.wait);
  }
  j["mass_error"] = res.mass_error;
  j["reducer"] = to_string(res.reducer);
  return j;
}

// ---------------------------------------------------------------------------
// Grids and CSV
// ---------------------------------------------------------------------------

struct GridSpec {
  double x_min = 0.0;
  double x_max = 20.0;
  int points = 101;
  bool log = false;

  std::vector<double> values() const {
    std::vector<double> xs(points);
    for (int i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / (points - 1);
      xs[i] = log ? x_min * std::pow(x_max / x_min, t) : x_min + (x_max - x_min) * t;
    }
    if (!log) xs.back() = x_max;
    return xs;
  }
};

/// "xmin:xmax:points" or "xmin:xmax:points:log".
inline GridSpec grid_from(const std::string& text) {
  GridSpec g;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() < 3 || parts.size() > 4) {
    throw ConfigError("grid: expected xmin:xmax:points[:linear|log], got \"" + text + "\"");
  }
  try {
    g.x_min = std::stod(parts[0]);
    g.x_max = std::stod(parts[1]);
    g.points = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw ConfigError("grid: could not parse \"" + text + "\"");
  }
  if (parts.size() == 4) {
    if (parts[3] == "log") {
      g.log = true;
    } else if (parts[3] != "linear") {
      throw ConfigError("grid: spacing must be linear or log");
    }
  }
  if (g.points < 2) throw ConfigError("grid: points must be >= 2");
  if (!(g.x_min >= 0.0) || !(g.x_max > g.x_min)) throw ConfigError("grid: need 0 <= xmin < xmax");
  if (g.log && !(g.x_min > 0.0)) throw ConfigError("grid: log spacing needs xmin > 0");
  return g;
}

/// Column-oriented numeric table written with 6 significant digits.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

inline std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const CsvTable& t) {
  for (std::size_t c = 0; c < t.header.size(); ++c) os << (c ? "," : "") << t.header[c];
  os << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      os << (c ? "," : "") << format_g6(t.columns[c][r]);
    }
    os << '\n';
  }
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) t.header.push_back(cell);
  }
  t.columns.assign(t.header.size(), {});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::size_t c = 0;
    for (std::string cell; std::getline(ss, cell, ','); ++c) {
      if (c >= t.columns.size()) throw ConfigError("csv: row wider than header");
      t.columns[c].push_back(std::stod(cell));
    }
    if (c != t.columns.size()) throw ConfigError("csv: row narrower than header");
  }
  return t;
}

/// x, pdf, cdf of an ME law on a grid.
inline CsvTable density_table(const MeDistribution& d, const std::vector<double>& xs) {
  CsvTable t{{"x", "pdf", "cdf"}, {xs, {}, {}}};
  for (const double x : xs) {
    t.columns[1].push_back(pdf(d, x));
    t.columns[2].push_back(cdf(d, x));
  }
  return t;
}

}  // namespace aoi
