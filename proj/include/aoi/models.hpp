#pragma once

// Fluid-queue constructions for the AoI/PAoI of two single-source systems:
//
//  * bufferless PH/PH/1/1/P(p): a new arrival preempts the packet in service
//    with probability p and is discarded otherwise;
//  * single-buffer M/PH/1/2/R(r): a new arrival replaces the waiting packet
//    with probability r and is discarded otherwise.
//
// Each cycle of the constructed fluid level retraces one AoI cycle (rising
// from a system time D_j to the next peak) inside a designated set of
// phases, so the stationary level density restricted to those phases is the
// AoI density and the level at the jump that ends the cycle is the PAoI.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/mfq.hpp"
#include "aoi/phdist.hpp"

namespace aoi {

struct BufferlessSpec {
  PhDistribution arrival;  // interarrival time (tau, T), order k
  PhDistribution service;  // service time (sigma, S), order l
  double p = 0.0;          // preemption probability
};

struct SingleBufferSpec {
  double lambda = 1.0;     // Poisson arrival rate
  PhDistribution service;
  double r = 0.0;          // replacement probability
};

using ModelSpec = std::variant<BufferlessSpec, SingleBufferSpec>;

/// Contiguous index ranges of the phase sets, in state order.
class StatePartition {
public:
  struct Block {
    std::string label;
    Eigen::Index begin = 0;
    Eigen::Index size = 0;
    // For product phases (arrival phase i, service phase j) laid out
    // lexicographically: index = begin + i * inner + j.
    Eigen::Index inner = 1;
  };

  Eigen::Index add(std::string label, Eigen::Index size, Eigen::Index inner = 1) {
    const Eigen::Index begin = total_;
    blocks_.push_back({std::move(label), begin, size, inner});
    total_ += size;
    return begin;
  }

  const Block& block(const std::string& label) const {
    for (const auto& b : blocks_) {
      if (b.label == label) return b;
    }
    throw DomainError("StatePartition: no phase set named " + label);
  }

  Eigen::Index index(const std::string& label, Eigen::Index i, Eigen::Index j = 0) const {
    const Block& b = block(label);
    const Eigen::Index idx = i * b.inner + j;
    if (i < 0 || j < 0 || j >= b.inner || idx >= b.size) {
      throw DomainError("StatePartition: index out of range in " + label);
    }
    return b.begin + idx;
  }

  std::vector<Eigen::Index> states(std::initializer_list<std::string> labels) const {
    std::vector<Eigen::Index> out;
    for (const auto& l : labels) {
      const Block& b = block(l);
      for (Eigen::Index k = 0; k < b.size; ++k) out.push_back(b.begin + k);
    }
    return out;
  }

  const std::vector<Block>& blocks() const { return blocks_; }
  Eigen::Index size() const { return total_; }

private:
  std::vector<Block> blocks_;
  Eigen::Index total_ = 0;
};

struct AgeResult {
  MeDistribution aoi;
  MeDistribution paoi;
  std::optional<MeDistribution> wait;  // single-buffer only

  MatrixExpForm aoi_form;
  MatrixExpForm paoi_form;
  std::optional<MatrixExpForm> wait_form;

  double mean_aoi = 0.0;
  double second_aoi = 0.0;
  double mean_paoi = 0.0;
  double second_paoi = 0.0;
  double mean_wait = 0.0;
  double second_wait = 0.0;

  ModelSpec model;
  double rho = 0.0;
  // Largest |total probability - 1| over the fluid queues solved.
  double mass_error = 0.0;
  Reducer reducer = Reducer::Auto;
};

/// Tail probability of the age: 1 - F(x).
inline double age_violation(const MeDistribution& d, double x) {
  if (!(x >= 0.0)) throw DomainError("age_violation: x must be nonnegative");
  return 1.0 - cdf(d, x);
}

namespace detail {

inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return out;
}

inline void require_valid_ph(const PhDistribution& d, const char* what) {
  const auto problems = validate(d);
  if (!problems.empty()) {
    throw StructuralError(std::string(what) + ": " + problems.front());
  }
  if (d.mass0 != 0.0) {
    throw StructuralError(std::string(what) + ": mass at zero is not allowed");
  }
}

inline void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(name) + " must lie in [0,1]");
  }
}

inline void fill_age(AgeResult& res, const MatrixExpForm& aoi, const MatrixExpForm& paoi) {
  res.aoi_form = aoi;
  res.paoi_form = paoi;
  res.aoi = me_from_form(aoi.g, aoi.A, aoi.h, aoi.mass0);
  res.paoi = me_from_form(paoi.g, paoi.A, paoi.h, paoi.mass0);
  res.mean_aoi = form_moment(aoi, 1);
  res.second_aoi = form_moment(aoi, 2);
  res.mean_paoi = form_moment(paoi, 1);
  res.second_paoi = form_moment(paoi, 2);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bufferless PH/PH/1/1/P(p)
// ---------------------------------------------------------------------------

struct BuiltModel {
  GmfqSpec spec;
  StatePartition partition;
};

/// Fluid queue of order 2kl + k + 1. Phase sets: S1 (arrival, service)
/// packet of the cycle in service; S2 arrival phase, waiting for the next
/// arrival; S3 (arrival, service) next packet in service; S4 the reset state
/// that drains the level and dwells at zero.
inline BuiltModel build_bufferless(const BufferlessSpec& spec, double reset_rate = 1.0) {
  detail::require_valid_ph(spec.arrival, "bufferless arrival");
  detail::require_valid_ph(spec.service, "bufferless service");
  detail::require_probability(spec.p, "preemption probability p");
  if (!(reset_rate > 0.0)) throw DomainError("reset rate must be positive");

  const Eigen::Index k = spec.arrival.order();
  const Eigen::Index l = spec.service.order();
  const double p = spec.p;
  const Matrix& T = spec.arrival.S;
  const Matrix& S = spec.service.S;
  const Matrix tau = spec.arrival.alpha;         // 1 x k
  const Matrix sigma = spec.service.alpha;       // 1 x l
  const Matrix kappa = spec.arrival.exit_rates(); // k x 1
  const Matrix nu = spec.service.exit_rates();    // l x 1
  const Matrix Ik = Matrix::Identity(k, k);
  const Matrix Il = Matrix::Identity(l, l);
  const Matrix ones_k = Matrix::Ones(k, 1);
  const Matrix ones_l = Matrix::Ones(l, 1);
  const Matrix tau_sigma = detail::kron(tau, sigma);  // 1 x kl

  BuiltModel out;
  auto& part = out.partition;
  const Eigen::Index s1 = part.add("S1", k * l, l);
  const Eigen::Index s2 = part.add("S2", k);
  const Eigen::Index s3 = part.add("S3", k * l, l);
  const Eigen::Index s4 = part.add("S4", 1);
  const Eigen::Index n = part.size();

  const Matrix Q11 = detail::kron(Ik, S) + detail::kron(T, Il) +
                     (1.0 - p) * detail::kron(kappa * tau, Il);
  const Matrix Q33 = Q11 + p * detail::kron(kappa, ones_l) * tau_sigma;

  Matrix Q = Matrix::Zero(n, n);
  Q.block(s1, s1, k * l, k * l) = Q11;
  Q.block(s1, s2, k * l, k) = detail::kron(Ik, nu);
  Q.block(s1, s4, k * l, 1) = p * detail::kron(kappa, ones_l);
  Q.block(s2, s2, k, k) = T;
  Q.block(s2, s3, k, k * l) = kappa * tau_sigma;
  Q.block(s3, s3, k * l, k * l) = Q33;
  Q.block(s3, s4, k * l, 1) = detail::kron(ones_k, nu);

  Matrix Qt = Matrix::Zero(n, n);
  Qt.block(s4, s1, 1, k * l) = reset_rate * tau_sigma;
  Qt(s4, s4) = -reset_rate;

  Vector R = Vector::Ones(n);
  R(s4) = -1.0;

  out.spec = GmfqSpec{std::move(Q), std::move(Qt), std::move(R)};
  return out;
}

inline AgeResult analyze_bufferless(const BufferlessSpec& spec, const SolveOptions& opt = {},
                                    double reset_rate = 1.0) {
  const BuiltModel built = build_bufferless(spec, reset_rate);
  SteadyState ss;
  try {
    ss = solve(built.spec, opt);
  } catch (const ModelInstabilityError& e) {
    throw ModelInstabilityError(std::string("bufferless model: ") + e.what(), e.expected,
                                e.found);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("bufferless model: ") + e.what(), e.condition);
  }
  const auto& part = built.partition;

  AgeResult res;
  res.model = spec;
  res.rho = moment(spec.service, 1) / moment(spec.arrival, 1);
  res.mass_error = ss.diagnostics.mass_error;
  res.reducer = ss.diagnostics.reducer;

  const MatrixExpForm aoi = restricted_density(ss, part.states({"S2", "S3"}));
  const MatrixExpForm paoi = conditional_entry_density(ss, built.spec.Q, part.states({"S3"}),
                                                       part.block("S4").begin);
  detail::fill_age(res, aoi, paoi);
  return res;
}

// ---------------------------------------------------------------------------
// Single-buffer M/PH/1/2/R(r)
// ---------------------------------------------------------------------------

/// Residual-service fluid queue of order l + 2: S1 service phases (level
/// rises with the service time), "0" draining with an empty waiting room,
/// "1" draining with a packet waiting.
inline BuiltModel build_residual_process(double lambda, const PhDistribution& service,
                                         double reset_rate = 1.0) {
  if (!(lambda > 0.0)) throw DomainError("arrival rate must be positive");
  detail::require_valid_ph(service, "service");
  if (!(reset_rate > 0.0)) throw DomainError("reset rate must be positive");
  const Eigen::Index l = service.order();

  BuiltModel out;
  auto& part = out.partition;
  const Eigen::Index s1 = part.add("S1", l);
  const Eigen::Index e0 = part.add("0", 1);
  const Eigen::Index e1 = part.add("1", 1);
  const Eigen::Index n = part.size();

  Matrix Q = Matrix::Zero(n, n);
  Q.block(s1, s1, l, l) = service.S;
  Q.block(s1, e0, l, 1) = service.exit_rates();
  Q(e0, e0) = -lambda;
  Q(e0, e1) = lambda;

  Matrix Qt = Matrix::Zero(n, n);
  Qt.block(e0, s1, 1, l) = lambda * service.alpha;
  Qt(e0, e0) = -lambda;
  Qt.block(e1, s1, 1, l) = reset_rate * service.alpha;
  Qt(e1, e1) = -reset_rate;

  Vector R = Vector::Ones(n);
  R(e0) = -1.0;
  R(e1) = -1.0;

  out.spec = GmfqSpec{std::move(Q), std::move(Qt), std::move(R)};
  return out;
}

struct WaitTime {
  MeDistribution distribution;
  MatrixExpForm form;
  double mass_error = 0.0;
};

/// Queue wait of successful packets: the residual service seen by an
/// arrival that finds the waiting room empty (or replaces its occupant with
/// probability r), thinned by e^{-r lambda x} for not being replaced itself.
inline WaitTime wait_time_distribution(double lambda, const PhDistribution& service, double r,
                                       double reset_rate = 1.0) {
  detail::require_probability(r, "replacement probability r");
  const BuiltModel built = build_residual_process(lambda, service, reset_rate);
  const SteadyState ss = solve(built.spec);
  const Eigen::Index i0 = built.partition.block("0").begin;
  const Eigen::Index i1 = built.partition.block("1").begin;

  const Eigen::Index l = ss.A.rows();
  const Matrix Ar = ss.A - r * lambda * Matrix::Identity(l, l);
  const Vector h = ss.H.col(i0) + r * ss.H.col(i1);
  const double c0 = ss.c(i0);
  const double eta = 1.0 / (c0 - ss.g.dot(Ar.partialPivLu().solve(h).transpose()));

  WaitTime out;
  out.form = MatrixExpForm{eta * ss.g, Ar, h, eta * c0};
  out.distribution = me_from_form(out.form.g, out.form.A, out.form.h, out.form.mass0);
  out.mass_error = ss.diagnostics.mass_error;
  return out;
}

/// Fluid queue of order 4l + 2 driven by the wait distribution (beta, B,
/// beta0). Phase sets: S1 waiting; S2 in service, room empty; S3 in service,
/// next packet waiting; S4 idle after service; S5 next packet in service; S6
/// reset.
inline BuiltModel build_single_buffer(const SingleBufferSpec& spec, const MeDistribution& wait,
                                      double reset_rate = 1.0) {
  if (!(spec.lambda > 0.0)) throw DomainError("arrival rate must be positive");
  detail::require_valid_ph(spec.service, "service");
  detail::require_probability(spec.r, "replacement probability r");
  if (!(reset_rate > 0.0)) throw DomainError("reset rate must be positive");
  const Eigen::Index l = spec.service.order();
  if (wait.order() != l || wait.alpha.size() != l) {
    std::ostringstream os;
    os << "wait distribution has order " << wait.order() << ", service has order " << l;
    throw StructuralError(os.str());
  }
  const double lambda = spec.lambda;
  const Matrix& S = spec.service.S;
  const Matrix sigma = spec.service.alpha;
  const Matrix nu = spec.service.exit_rates();
  const Matrix psi = -wait.S.rowwise().sum();
  const Matrix Il = Matrix::Identity(l, l);

  BuiltModel out;
  auto& part = out.partition;
  const Eigen::Index s1 = part.add("S1", l);
  const Eigen::Index s2 = part.add("S2", l);
  const Eigen::Index s3 = part.add("S3", l);
  const Eigen::Index s4 = part.add("S4", 1);
  const Eigen::Index s5 = part.add("S5", l);
  const Eigen::Index s6 = part.add("S6", 1);
  const Eigen::Index n = part.size();

  Matrix Q = Matrix::Zero(n, n);
  Q.block(s1, s1, l, l) = wait.S;
  Q.block(s1, s2, l, l) = psi * sigma;
  Q.block(s2, s2, l, l) = S - lambda * Il;
  Q.block(s2, s3, l, l) = lambda * Il;
  Q.block(s2, s4, l, 1) = nu;
  Q.block(s3, s3, l, l) = S;
  Q.block(s3, s5, l, l) = nu * sigma;
  Q(s4, s4) = -lambda;
  Q.block(s4, s5, 1, l) = lambda * sigma;
  Q.block(s5, s5, l, l) = S;
  Q.block(s5, s6, l, 1) = nu;

  Matrix Qt = Matrix::Zero(n, n);
  Qt.block(s6, s1, 1, l) = reset_rate * wait.alpha;
  Qt.block(s6, s2, 1, l) = reset_rate * wait.mass0 * sigma;
  Qt(s6, s6) = -reset_rate;

  Vector R = Vector::Ones(n);
  R(s6) = -1.0;

  out.spec = GmfqSpec{std::move(Q), std::move(Qt), std::move(R)};
  return out;
}

inline AgeResult analyze_single_buffer(const SingleBufferSpec& spec, const SolveOptions& opt = {},
                                       double reset_rate = 1.0) {
  WaitTime wait;
  try {
    wait = wait_time_distribution(spec.lambda, spec.service, spec.r, reset_rate);
  } catch (const ModelInstabilityError& e) {
    throw ModelInstabilityError(std::string("residual-service model: ") + e.what(), e.expected,
                                e.found);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("residual-service model: ") + e.what(), e.condition);
  }
  const BuiltModel built = build_single_buffer(spec, wait.distribution, reset_rate);
  SolveOptions relaxed = opt;
  relaxed.require_nonnegative_rates = false;  // the wait block is ME, not PH
  SteadyState ss;
  try {
    ss = solve(built.spec, relaxed);
  } catch (const ModelInstabilityError& e) {
    throw ModelInstabilityError(std::string("single-buffer model: ") + e.what(), e.expected,
                                e.found);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("single-buffer model: ") + e.what(), e.condition);
  }
  const auto& part = built.partition;

  AgeResult res;
  res.model = spec;
  res.rho = spec.lambda * moment(spec.service, 1);
  res.mass_error = std::max(wait.mass_error, ss.diagnostics.mass_error);
  res.reducer = ss.diagnostics.reducer;

  const MatrixExpForm aoi = restricted_density(ss, part.states({"S4", "S5"}));
  const MatrixExpForm paoi = conditional_entry_density(ss, built.spec.Q, part.states({"S5"}),
                                                       part.block("S6").begin);
  detail::fill_age(res, aoi, paoi);
  res.wait = wait.distribution;
  res.wait_form = wait.form;
  res.mean_wait = form_moment(wait.form, 1);
  res.second_wait = form_moment(wait.form, 2);
  return res;
}

inline AgeResult analyze(const ModelSpec& spec, const SolveOptions& opt = {}) {
  return std::visit(
      [&](const auto& s) -> AgeResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BufferlessSpec>) {
          return analyze_bufferless(s, opt);
        } else {
          return analyze_single_buffer(s, opt);
        }
      },
      spec);
}

}  // namespace aoi
