#pragma once

// Phase-type (PH) and matrix-exponential (ME) distributions.
//
// Both share the density form  f(x) = -alpha e^{Sx} S 1  for x > 0 plus a
// point mass `mass0` at zero. PH parameters carry the absorbing-chain
// interpretation; ME parameters only need to produce a valid density.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/linalg/expm.hpp"
#include "aoi/numeric_policy.hpp"

namespace aoi {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

struct PhDistribution {
  RowVector alpha;
  Matrix S;
  double mass0 = 0.0;

  Eigen::Index order() const { return S.rows(); }
  // nu = -S 1, the absorption-rate vector.
  Vector exit_rates() const { return -S.rowwise().sum(); }
};

struct MeDistribution {
  RowVector alpha;
  Matrix S;
  double mass0 = 0.0;

  MeDistribution() = default;
  MeDistribution(RowVector a, Matrix s, double m0)
      : alpha(std::move(a)), S(std::move(s)), mass0(m0) {}
  // Every PH distribution is an ME distribution.
  MeDistribution(const PhDistribution& ph) : alpha(ph.alpha), S(ph.S), mass0(ph.mass0) {}

  Eigen::Index order() const { return S.rows(); }
};

template <typename D>
concept MatrixExponentialLaw = requires(const D& d) {
  { d.alpha } -> std::convertible_to<RowVector>;
  { d.S } -> std::convertible_to<Matrix>;
  { d.mass0 } -> std::convertible_to<double>;
};

namespace detail {

template <MatrixExponentialLaw D>
void check_shape(const D& d, const char* where) {
  if (d.S.rows() != d.S.cols()) {
    throw StructuralError(std::string(where) + ": subgenerator is not square");
  }
  if (d.alpha.size() != d.S.rows()) {
    std::ostringstream os;
    os << where << ": alpha has length " << d.alpha.size() << " but S is "
       << d.S.rows() << "x" << d.S.cols();
    throw StructuralError(os.str());
  }
}

inline double max_real_eigenvalue(const Matrix& S) {
  if (S.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(S, false);
  return es.eigenvalues().real().maxCoeff();
}

inline std::string fmt_residual(const char* label, double value) {
  std::ostringstream os;
  os.precision(3);
  os << label << " (measured " << std::scientific << value << ")";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Density at x > 0. The point mass at zero is never folded in; pdf(d, 0)
/// returns the right limit of the continuous part.
template <MatrixExponentialLaw D>
double pdf(const D& d, double x) {
  if (!(x >= 0.0)) throw DomainError("pdf: x must be nonnegative");
  if (d.S.rows() == 0) return 0.0;
  const Vector nu = -d.S.rowwise().sum();
  return d.alpha * (linalg::expm(d.S * x) * nu);
}

template <MatrixExponentialLaw D>
double cdf(const D& d, double x) {
  if (!(x >= 0.0)) throw DomainError("cdf: x must be nonnegative");
  if (d.S.rows() == 0) return 1.0;
  const Vector ones = Vector::Ones(d.S.rows());
  return 1.0 - d.alpha * (linalg::expm(d.S * x) * ones);
}

/// E[X^i] = i! alpha (-S)^{-i} 1.
template <MatrixExponentialLaw D>
double moment(const D& d, int i) {
  if (i < 1) throw DomainError("moment: order must be >= 1");
  if (d.S.rows() == 0) return 0.0;
  const auto lu = (-d.S).partialPivLu();
  Vector v = Vector::Ones(d.S.rows());
  double factorial = 1.0;
  for (int k = 1; k <= i; ++k) {
    v = lu.solve(v);
    factorial *= k;
  }
  return factorial * d.alpha.dot(v.transpose());
}

template <MatrixExponentialLaw D>
double scov(const D& d) {
  const double m1 = moment(d, 1);
  return moment(d, 2) / (m1 * m1) - 1.0;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Returns a description of every violated PH invariant; empty when valid.
inline std::vector<std::string> validate(const PhDistribution& d,
                                         const NumericPolicy& pol = numeric_policy()) {
  detail::check_shape(d, "validate");
  std::vector<std::string> out;
  const Eigen::Index m = d.order();

  if (m > 0 && d.alpha.minCoeff() < 0.0) {
    out.push_back(detail::fmt_residual("alpha has a negative entry", d.alpha.minCoeff()));
  }
  if (d.mass0 < 0.0 || d.mass0 > 1.0) {
    out.push_back(detail::fmt_residual("mass0 outside [0,1]", d.mass0));
  }
  const double mass = d.alpha.sum() + d.mass0 - 1.0;
  if (std::abs(mass) > pol.ph_mass_tol) {
    out.push_back(detail::fmt_residual("alpha*1+mass0 != 1", mass));
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(d.S(i, i) < 0.0)) {
      out.push_back(detail::fmt_residual("diagonal of S not strictly negative", d.S(i, i)));
      break;
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    bool bad = false;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j && d.S(i, j) < 0.0) {
        out.push_back(detail::fmt_residual("off-diagonal of S negative", d.S(i, j)));
        bad = true;
        break;
      }
    }
    if (bad) break;
  }
  if (m > 0) {
    const double row_max = d.S.rowwise().sum().maxCoeff();
    if (row_max > pol.generator_row_tol * std::max(1.0, d.S.cwiseAbs().maxCoeff())) {
      out.push_back(detail::fmt_residual("S*1 has a positive entry", row_max));
    }
    const double re = detail::max_real_eigenvalue(d.S);
    if (!(re < 0.0)) {
      out.push_back(detail::fmt_residual("S has an eigenvalue with nonnegative real part", re));
    }
  }
  return out;
}

/// Returns a description of every violated ME invariant; empty when valid.
inline std::vector<std::string> validate(const MeDistribution& d,
                                         const NumericPolicy& pol = numeric_policy()) {
  detail::check_shape(d, "validate");
  std::vector<std::string> out;
  const Eigen::Index m = d.order();
  if (d.mass0 < 0.0 || d.mass0 > 1.0) {
    out.push_back(detail::fmt_residual("mass0 outside [0,1]", d.mass0));
  }
  const double mass = d.alpha.sum() + d.mass0 - 1.0;
  if (std::abs(mass) > pol.me_mass_tol) {
    out.push_back(detail::fmt_residual("alpha*1+mass0 != 1", mass));
  }
  if (m == 0) return out;

  Eigen::EigenSolver<Matrix> es(d.S, false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  const double re_max = ev.real().maxCoeff();
  if (!(re_max < 0.0)) {
    out.push_back(detail::fmt_residual("S has an eigenvalue with nonnegative real part", re_max));
    return out;
  }

  // Log-spaced nonnegativity screen out to 40 time constants of the slowest
  // mode.
  const double horizon = pol.me_screen_horizon / std::abs(re_max);
  const double lo = horizon * 1e-6;
  const int points = std::max(pol.me_screen_points, 200);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double x = lo * std::pow(horizon / lo, static_cast<double>(k) / (points - 1));
    worst = std::min(worst, pdf(d, x));
  }
  if (worst < pol.me_pdf_floor) {
    out.push_back(detail::fmt_residual("pdf negative on screening grid", worst));
  }
  return out;
}

/// Reinterprets ME parameters as PH; throws when they lack the stochastic
/// sign structure.
inline PhDistribution as_phase_type(const MeDistribution& d) {
  PhDistribution ph{d.alpha, d.S, d.mass0};
  const auto problems = validate(ph);
  if (!problems.empty()) {
    throw UnsupportedOperation("distribution is not phase-type: " + problems.front());
  }
  return ph;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

inline PhDistribution exponential(double rate) {
  if (!(rate > 0.0)) throw DomainError("exponential: rate must be positive");
  return {RowVector::Ones(1), Matrix::Constant(1, 1, -rate), 0.0};
}

/// Erlang with the given mean and number of stages (per-stage rate order/mean).
inline PhDistribution erlang(double mean, int order) {
  if (!(mean > 0.0)) throw DomainError("erlang: mean must be positive");
  if (order < 1) throw DomainError("erlang: order must be >= 1");
  const double rate = order / mean;
  PhDistribution d{RowVector::Zero(order), Matrix::Zero(order, order), 0.0};
  d.alpha(0) = 1.0;
  for (int i = 0; i < order; ++i) {
    d.S(i, i) = -rate;
    if (i + 1 < order) d.S(i, i + 1) = rate;
  }
  return d;
}

/// Two-moment fit. scov = 1/j gives Erlang(j); other scov < 1 a mixture of
/// Erlang(k-1) and Erlang(k) with a common rate; scov > 1 a two-phase
/// hyper-exponential with balanced means.
inline PhDistribution fit_mean_scov(double mean, double cv2) {
  if (!(mean > 0.0)) throw DomainError("fit_mean_scov: mean must be positive");
  if (!(cv2 > 0.0)) throw DomainError("fit_mean_scov: scov must be positive");

  constexpr double integer_tol = 1e-9;
  if (std::abs(cv2 - 1.0) <= integer_tol) return exponential(1.0 / mean);

  if (cv2 < 1.0) {
    const double inv = 1.0 / cv2;
    const double j = std::round(inv);
    if (std::abs(inv - j) <= integer_tol * inv) {
      return erlang(mean, static_cast<int>(j));
    }
    // 1/k <= scov <= 1/(k-1)
    const int k = static_cast<int>(std::ceil(inv));
    const double q =
        (k * cv2 - std::sqrt(k * (1.0 + cv2) - static_cast<double>(k) * k * cv2)) /
        (1.0 + cv2);
    const double rate = (k - q) / mean;
    // k stages in series; entering at stage 2 skips one stage, which is the
    // Erlang(k-1) branch taken with probability q.
    PhDistribution d{RowVector::Zero(k), Matrix::Zero(k, k), 0.0};
    d.alpha(0) = 1.0 - q;
    d.alpha(1) = q;
    for (int i = 0; i < k; ++i) {
      d.S(i, i) = -rate;
      if (i + 1 < k) d.S(i, i + 1) = rate;
    }
    return d;
  }

  const double root = std::sqrt((cv2 - 1.0) / (cv2 + 1.0));
  const double q1 = 0.5 * (1.0 + root);
  const double q2 = 0.5 * (1.0 - root);
  PhDistribution d{RowVector(2), Matrix::Zero(2, 2), 0.0};
  d.alpha << q1, q2;
  d.S(0, 0) = -2.0 * q1 / mean;
  d.S(1, 1) = -2.0 * q2 / mean;
  return d;
}

/// Lemma-style realization: given f(x) = g e^{Ax} h (x > 0) plus mass0 at
/// zero, find (alpha, S) with alpha = g M, S = M^-1 A M and M 1 = -A^-1 h so
/// that -alpha e^{Sx} S 1 reproduces g e^{Ax} h exactly.
inline MeDistribution me_from_form(const RowVector& g, const Matrix& A, const Vector& h,
                                   double mass0,
                                   const NumericPolicy& pol = numeric_policy()) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || g.size() != n || h.size() != n) {
    throw StructuralError("me_from_form: dimension mismatch");
  }
  if (n == 0 || h.isZero(0.0)) {
    if (std::abs(mass0 - 1.0) > pol.form_mass_tol) {
      throw ContractError("me_from_form: h = 0 requires all mass at zero");
    }
    return MeDistribution(RowVector::Zero(n), A, 1.0);
  }
  const auto lu = A.partialPivLu();
  const Vector v = -lu.solve(h);
  const double total = g.dot(v.transpose()) + mass0;
  if (std::abs(total - 1.0) > pol.form_mass_tol) {
    std::ostringstream os;
    os << "me_from_form: -g A^-1 h + mass0 = " << total << ", expected 1";
    throw ContractError(os.str());
  }

  // Pivot on the largest |v_k|; rows with v_i ~ 0 get M_ii = 1, M_ik = -1.
  Eigen::Index k = 0;
  const double zero = pol.form_zero_rel * v.cwiseAbs().maxCoeff(&k);
  Matrix M = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(v(i)) > zero) {
      M(i, i) = v(i);
    } else {
      M(i, i) = 1.0;
      M(i, k) = -1.0;
    }
  }
  const auto Mlu = M.partialPivLu();
  const Matrix S = Mlu.solve(A * M);
  return MeDistribution(g * M, S, mass0);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

using RandomStream = std::mt19937_64;

/// Uniform on (0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(RandomStream& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential_variate(RandomStream& rng, double rate) {
  return -std::log(uniform01(rng)) / rate;
}

/// Samples a PH distribution by running its absorbing chain. Tables are
/// built once; sampling is allocation-free.
class PhSampler {
public:
  explicit PhSampler(const PhDistribution& d) {
    detail::check_shape(d, "PhSampler");
    const Eigen::Index m = d.order();
    start_.reserve(m);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      acc += d.alpha(i);
      start_.push_back(acc);
    }
    rate_.resize(m);
    jump_.assign(m, {});
    for (Eigen::Index i = 0; i < m; ++i) {
      rate_[i] = -d.S(i, i);
      double c = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j == i || d.S(i, j) <= 0.0) continue;
        c += d.S(i, j) / rate_[i];
        jump_[i].push_back({c, static_cast<int>(j)});
      }
    }
  }

  double operator()(RandomStream& rng) const {
    const double u0 = uniform01(rng);
    const double total = start_.empty() ? 0.0 : start_.back();
    if (u0 >= total) return 0.0;  // mass at zero
    int phase = static_cast<int>(
        std::lower_bound(start_.begin(), start_.end(), u0) - start_.begin());
    double t = 0.0;
    for (;;) {
      t += exponential_variate(rng, rate_[phase]);
      const auto& row = jump_[phase];
      if (row.empty()) return t;
      const double u = uniform01(rng);
      if (u >= row.back().first) return t;  // absorbed
      int next = row.front().second;
      for (const auto& [c, j] : row) {
        if (u < c) {
          next = j;
          break;
        }
      }
      phase = next;
    }
  }

private:
  std::vector<double> start_;
  std::vector<double> rate_;
  std::vector<std::vector<std::pair<double, int>>> jump_;
};

inline double sample(const PhDistribution& d, RandomStream& rng) {
  return PhSampler(d)(rng);
}

/// Only ME parameters with PH sign structure can be sampled.
inline double sample(const MeDistribution& d, RandomStream& rng) {
  return PhSampler(as_phase_type(d))(rng);
}

}  // namespace aoi
