#pragma once

// Generalized Markov fluid queues GMFQ(Q, Qtilde, R): the modulating chain
// follows Q while the fluid level is positive and Qtilde while it sits at
// zero. The stationary solution has the matrix-exponential form
//
//   f_i(x) = g e^{Ax} h_i   (x > 0),     c_i = Pr{level = 0, state i},
//
// obtained from an ordered invariant-subspace split of Q R^-1 followed by a
// small boundary/normalization linear system.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/linalg/expm.hpp"
#include "aoi/linalg/ordered_schur.hpp"
#include "aoi/numeric_policy.hpp"
#include "aoi/phdist.hpp"

namespace aoi {

struct GmfqSpec {
  Matrix Q;       // generator while level > 0
  Matrix Qtilde;  // generator while level = 0
  Vector R;       // drifts, all nonzero

  Eigen::Index size() const { return R.size(); }
  int positive_count() const { return static_cast<int>((R.array() > 0.0).count()); }
  int negative_count() const { return static_cast<int>((R.array() < 0.0).count()); }
};

/// Density of the form g e^{Ax} h for x > 0 plus mass0 at zero.
struct MatrixExpForm {
  RowVector g;
  Matrix A;
  Vector h;
  double mass0 = 0.0;

  double pdf(double x) const { return g * (linalg::expm(A * x) * h); }

  // mass0 + int_0^x g e^{At} h dt = mass0 + g A^-1 (e^{Ax} - I) h
  double cdf(double x) const {
    const Vector eh = linalg::expm(A * x) * h - h;
    return mass0 + g.dot(A.partialPivLu().solve(eh).transpose());
  }

  double total_mass() const { return mass0 - g.dot(A.partialPivLu().solve(h).transpose()); }
};

/// E[X^i] = (-1)^{i+1} i! g A^{-(i+1)} h; mass0 contributes nothing.
inline double form_moment(const MatrixExpForm& f, int i) {
  if (i < 1) throw DomainError("form_moment: order must be >= 1");
  const auto lu = f.A.partialPivLu();
  Vector v = f.h;
  double factorial = 1.0;
  for (int k = 1; k <= i + 1; ++k) {
    v = lu.solve(v);
    if (k <= i) factorial *= k;
  }
  const double sign = (i % 2 == 1) ? 1.0 : -1.0;
  return sign * factorial * f.g.dot(v.transpose());
}

enum class Reducer { Auto, Schur, Householder };

inline const char* to_string(Reducer r) {
  switch (r) {
    case Reducer::Schur: return "schur";
    case Reducer::Householder: return "householder";
    default: return "auto";
  }
}

struct SteadyState {
  RowVector g;  // 1 x b
  Matrix A;     // b x b, stable
  Matrix H;     // b x n, columns in the caller's state order
  RowVector c;  // 1 x n, point masses at level zero

  struct Diagnostics {
    Reducer reducer = Reducer::Auto;
    double orthogonality_error = 0.0;  // ||P^T P - I||_max
    double block_residual = 0.0;       // ||(P^T K P)_{21}||_max / ||K||_max
    double step2_residual = 0.0;
    double mass_error = 0.0;           // |total probability - 1|
    double anti_stable_threshold = 0.0;
  } diagnostics;

  Eigen::Index size() const { return c.size(); }

  /// f(x) for every state.
  RowVector densities(double x) const { return g * linalg::expm(A * x) * H; }
  double density(Eigen::Index i, double x) const { return densities(x)(i); }

  /// Pr{level <= x, state i} for every state.
  RowVector cumulative(double x) const {
    const Matrix E = linalg::expm(A * x) - Matrix::Identity(A.rows(), A.cols());
    const RowVector gAinv = A.transpose().partialPivLu().solve(g.transpose()).transpose();
    return c + gAinv * E * H;
  }

  /// int_0^inf f_i for every state.
  RowVector state_integrals() const {
    const RowVector gAinv = A.transpose().partialPivLu().solve(g.transpose()).transpose();
    return -gAinv * H;
  }

  double total_mass() const { return state_integrals().sum() + c.sum(); }

  /// Form for the density aggregated with weights w: sum_i w_i f_i(x).
  MatrixExpForm weighted(const Vector& w) const {
    return MatrixExpForm{g, A, H * w, 0.0};
  }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Violated invariants of a spec (empty when valid). Specs built from ME
/// (rather than PH) ingredients may carry negative off-diagonal entries;
/// pass require_nonnegative_rates = false for those.
inline std::vector<std::string> validate(const GmfqSpec& s, bool require_nonnegative_rates = true,
                                         const NumericPolicy& pol = numeric_policy()) {
  const Eigen::Index n = s.R.size();
  if (s.Q.rows() != n || s.Q.cols() != n || s.Qtilde.rows() != n || s.Qtilde.cols() != n) {
    std::ostringstream os;
    os << "GmfqSpec: Q " << s.Q.rows() << "x" << s.Q.cols() << ", Qtilde " << s.Qtilde.rows()
       << "x" << s.Qtilde.cols() << ", R length " << n;
    throw StructuralError(os.str());
  }
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.R(i) == 0.0) {
      out.push_back("zero drift in state " + std::to_string(i));
    }
  }
  auto check_generator = [&](const Matrix& G, const char* name) {
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    const double rows = G.rowwise().sum().cwiseAbs().maxCoeff();
    if (n > 0 && rows > pol.generator_row_tol * scale) {
      out.push_back(detail::fmt_residual((std::string(name) + " rows do not sum to zero").c_str(),
                                         rows));
    }
    if (!require_nonnegative_rates) return;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j && G(i, j) < 0.0) {
          out.push_back(detail::fmt_residual(
              (std::string(name) + " has a negative off-diagonal").c_str(), G(i, j)));
          return;
        }
      }
    }
  };
  check_generator(s.Q, "Q");
  check_generator(s.Qtilde, "Qtilde");
  return out;
}

// ---------------------------------------------------------------------------
// Step 1: orthogonal split of Q R^-1
// ---------------------------------------------------------------------------

/// Lemma-2 reflector for R = diag(1,...,1,-1) with a zero last row of Q:
/// P = I - 2 u u^T / (u^T u), u = u1 - ||u1|| e1, u1 = (1,...,1,-1)^T.
inline Matrix householder_reducer(Eigen::Index n) {
  if (n < 2) throw DomainError("householder_reducer: n must be >= 2");
  Vector u = Vector::Ones(n);
  u(n - 1) = -1.0;
  u(0) -= std::sqrt(static_cast<double>(n));
  return Matrix::Identity(n, n) - (2.0 / u.squaredNorm()) * u * u.transpose();
}

struct SpectralSplit {
  Matrix P;  // orthogonal
  Matrix T;  // P^T K P, block upper triangular
  int a = 0; // size of the leading anti-stable block
  Reducer reducer = Reducer::Schur;
};

inline double max_abs(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

/// Ordered real Schur split of K: the `a` eigenvalues with Re > -eps0 lead.
inline SpectralSplit schur_split(const Matrix& K, int a,
                                 const NumericPolicy& pol = numeric_policy()) {
  const double eps0 = pol.anti_stable_rel * K.lpNorm<Eigen::Infinity>();
  const auto schur = linalg::ordered_real_schur(K, -eps0);
  if (schur.leading != a) {
    std::ostringstream os;
    os << "fluid queue has " << schur.leading
       << " eigenvalues of Q R^-1 with nonnegative real part, expected " << a
       << " (one per negative-drift state)";
    throw ModelInstabilityError(os.str(), a, schur.leading);
  }
  return SpectralSplit{schur.Z, schur.T, a, Reducer::Schur};
}

inline SpectralSplit householder_split(const Matrix& K) {
  const Matrix P = householder_reducer(K.rows());
  return SpectralSplit{P, P * K * P, 1, Reducer::Householder};
}

namespace detail {

inline bool householder_applies(const GmfqSpec& s) {
  const Eigen::Index n = s.size();
  if (n < 2) return false;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (s.R(i) != 1.0) return false;
  }
  return s.R(n - 1) == -1.0 && s.Q.row(n - 1).isZero(0.0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct SolveOptions {
  Reducer reducer = Reducer::Auto;
  bool require_nonnegative_rates = true;
};

inline SteadyState solve(const GmfqSpec& spec, const SolveOptions& opt = {},
                         const NumericPolicy& pol = numeric_policy()) {
  const auto problems = validate(spec, opt.require_nonnegative_rates, pol);
  if (!problems.empty()) {
    throw ContractError("invalid fluid queue: " + problems.front());
  }
  const Eigen::Index n = spec.size();
  const int b = spec.positive_count();
  const int a = spec.negative_count();
  if (a == 0) {
    throw ModelInstabilityError("fluid queue has no negative drift; level is unbounded", 1, 0);
  }

  Reducer reducer = opt.reducer;
  if (reducer == Reducer::Auto) {
    reducer = detail::householder_applies(spec) ? Reducer::Householder : Reducer::Schur;
  } else if (reducer == Reducer::Householder && !detail::householder_applies(spec)) {
    throw ContractError(
        "Householder reducer needs R = diag(1,...,1,-1) and a zero last row of Q");
  }

  // Positive drifts first; perm[k] is the caller's index of internal state k.
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_partition(perm.begin(), perm.end(), [&](Eigen::Index i) { return spec.R(i) > 0; });
  Matrix Q(n, n), Qt(n, n);
  Vector R(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    R(r) = spec.R(perm[r]);
    for (Eigen::Index c = 0; c < n; ++c) {
      Q(r, c) = spec.Q(perm[r], perm[c]);
      Qt(r, c) = spec.Qtilde(perm[r], perm[c]);
    }
  }
  const Matrix K = Q * R.cwiseInverse().asDiagonal();

  SpectralSplit split = reducer == Reducer::Householder ? householder_split(K)
                                                        : schur_split(K, a, pol);

  SteadyState out;
  auto& diag = out.diagnostics;
  diag.reducer = reducer;
  diag.anti_stable_threshold = -pol.anti_stable_rel * K.lpNorm<Eigen::Infinity>();
  diag.orthogonality_error =
      max_abs(split.P.transpose() * split.P - Matrix::Identity(n, n));
  const double kscale = std::max(max_abs(K), 1e-300);
  diag.block_residual = max_abs(split.T.bottomLeftCorner(b, a)) / kscale;

  const Matrix A = split.T.bottomRightCorner(b, b);
  const Matrix Hint = split.P.transpose().bottomRows(b);

  if (reducer == Reducer::Householder && b > 0) {
    // The reflector fixes the zero eigenvalue but not stability of A.
    Eigen::EigenSolver<Matrix> es(A, false);
    const double re = es.eigenvalues().real().maxCoeff();
    if (!(re < diag.anti_stable_threshold)) {
      throw ModelInstabilityError("trailing block of the Householder split is not stable", 1,
                                  1 + static_cast<int>((es.eigenvalues().real().array() >=
                                                        diag.anti_stable_threshold)
                                                           .count()));
    }
  }

  // Step 2: [g d] [ H R      -A^-1 H 1 ] = [0 ... 0 1]
  //               [ -Qt*      1_a      ]
  const auto Alu = A.partialPivLu();
  Matrix system(n, n + 1);
  system.topLeftCorner(b, n) = Hint * R.asDiagonal();
  system.topRightCorner(b, 1) = -Alu.solve(Hint * Vector::Ones(n));
  system.bottomLeftCorner(a, n) = -Qt.bottomRows(a);
  system.bottomRightCorner(a, 1) = Vector::Ones(a);
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;

  const Matrix lhs = system.transpose();  // (n+1) x n, consistent with rank n
  const Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
  const Vector x = qr.solve(rhs);
  diag.step2_residual = (lhs * x - rhs).lpNorm<Eigen::Infinity>();
  if (qr.rank() < n || !(diag.step2_residual <= pol.step2_residual_tol)) {
    const double rmax = std::abs(qr.matrixQR()(0, 0));
    const double rmin = std::abs(qr.matrixQR()(n - 1, n - 1));
    std::ostringstream os;
    os << "boundary system is singular or inconsistent: rank " << qr.rank() << " of " << n
       << ", residual " << diag.step2_residual;
    throw NumericalError(os.str(), rmin > 0 ? rmax / rmin : INFINITY);
  }

  out.g = x.head(b).transpose();
  out.A = A;
  out.H.resize(b, n);
  out.c = RowVector::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.H.col(perm[k]) = Hint.col(k);
    if (k >= b) out.c(perm[k]) = x(k);
  }
  diag.mass_error = std::abs(out.total_mass() - 1.0);
  if (!(diag.mass_error <= pol.total_mass_tol)) {
    std::ostringstream os;
    os << "solved fluid queue has total probability off by " << diag.mass_error;
    throw NumericalError(os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditional entry density
// ---------------------------------------------------------------------------

class DegenerateConditioningError : public ContractError {
public:
  using ContractError::ContractError;
};

/// Density of the fluid level just before a jump from any state of `from`
/// into state `to`, in the form g' e^{Ax} h with h = H eta, eta_i = Q_{i,to}
/// on `from`.
inline MatrixExpForm conditional_entry_density(const SteadyState& ss, const Matrix& Q,
                                               const std::vector<Eigen::Index>& from,
                                               Eigen::Index to) {
  const Eigen::Index n = ss.size();
  if (Q.rows() != n || Q.cols() != n) {
    throw StructuralError("conditional_entry_density: Q does not match the steady state");
  }
  if (to < 0 || to >= n) throw DomainError("conditional_entry_density: target out of range");
  Vector eta = Vector::Zero(n);
  double rate_total = 0.0;
  for (const Eigen::Index i : from) {
    if (i < 0 || i >= n) throw DomainError("conditional_entry_density: state out of range");
    if (i == to) {
      throw ContractError("conditional_entry_density: target state is in the source set");
    }
    if (ss.c(i) != 0.0) {
      throw ContractError("conditional_entry_density: source state " + std::to_string(i) +
                          " carries probability mass at level zero");
    }
    eta(i) = Q(i, to);
    rate_total += Q(i, to);
  }
  if (!(rate_total > 0.0)) {
    throw DegenerateConditioningError(
        "conditional_entry_density: no transition rate from the source set into the target");
  }
  MatrixExpForm f = ss.weighted(eta);
  const double mass = f.total_mass();
  if (!(mass > 0.0)) {
    throw DegenerateConditioningError(
        "conditional_entry_density: source set carries no probability");
  }
  f.g /= mass;
  return f;
}

/// Normalized density of the level restricted to a set of states.
inline MatrixExpForm restricted_density(const SteadyState& ss,
                                        const std::vector<Eigen::Index>& states) {
  Vector w = Vector::Zero(ss.size());
  for (const Eigen::Index i : states) w(i) = 1.0;
  MatrixExpForm f = ss.weighted(w);
  const double mass = f.total_mass();
  if (!(mass > 0.0)) throw DegenerateConditioningError("restricted_density: empty state set");
  f.g /= mass;
  return f;
}

}  // namespace aoi
