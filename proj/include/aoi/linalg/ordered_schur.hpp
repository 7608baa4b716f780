#pragma once

#include <Eigen/Dense>

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <string>
#include <vector>

#include "aoi/errors.hpp"

namespace aoi::linalg {

// Real Schur factorization A = Z T Z^T with the eigenvalues satisfying
// Re(lambda) > threshold moved to the leading diagonal blocks of T.
struct OrderedSchur {
  Eigen::MatrixXd Z;  // orthogonal
  Eigen::MatrixXd T;  // quasi upper triangular
  Eigen::VectorXcd eigenvalues;  // in diagonal order of T
  int leading = 0;    // number of selected eigenvalues (complex pairs count 2)
};

namespace detail {

// dgees passes no user pointer to the selection callback.
inline thread_local double schur_threshold = 0.0;

inline lapack_logical select_right_of_threshold(const double* re, const double* /*im*/) {
  return *re > schur_threshold ? 1 : 0;
}

}  // namespace detail

// Backed by LAPACK dgees with eigenvalue sorting (block reordering via
// dtrsen internally).
inline OrderedSchur ordered_real_schur(const Eigen::MatrixXd& A, double threshold) {
  if (A.rows() != A.cols()) {
    throw StructuralError("ordered_real_schur: matrix is not square");
  }
  const lapack_int n = static_cast<lapack_int>(A.rows());
  OrderedSchur out;
  out.T = A;
  out.Z.resize(n, n);
  std::vector<double> wr(n), wi(n);
  lapack_int sdim = 0;

  detail::schur_threshold = threshold;
  const lapack_int info =
      LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', detail::select_right_of_threshold, n,
                    out.T.data(), n, &sdim, wr.data(), wi.data(), out.Z.data(), n);
  if (info < 0) {
    throw NumericalError("dgees: illegal argument " + std::to_string(-info));
  }
  if (info > 0 && info <= n) {
    throw NumericalError("dgees: QR iteration failed to converge");
  }
  if (info == n + 1) {
    throw NumericalError("dgees: eigenvalues too close to reorder (ill-conditioned)");
  }
  // info == n + 2 means rounding moved an eigenvalue across the threshold
  // during reordering; sdim is then recounted below from the final T.

  out.eigenvalues.resize(n);
  int leading = 0;
  bool still_leading = true;
  for (lapack_int i = 0; i < n; ++i) {
    out.eigenvalues[i] = {wr[i], wi[i]};
    if (still_leading && wr[i] > threshold) {
      ++leading;
    } else {
      still_leading = false;
    }
  }
  out.leading = leading;
  return out;
}

}  // namespace aoi::linalg
