#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace aoi::linalg {

namespace detail {

// Pade approximant of degree m to exp(A): returns U (odd part) and V (even
// part) so that exp(A) ~ (V - U)^-1 (V + U).
template <typename MatrixType>
void pade_terms(int degree, const MatrixType& A, MatrixType& U, MatrixType& V) {
  const Eigen::Index n = A.rows();
  const MatrixType I = MatrixType::Identity(n, n);
  const MatrixType A2 = A * A;

  switch (degree) {
    case 3: {
      constexpr double b[] = {120.0, 60.0, 12.0, 1.0};
      U.noalias() = A * (b[3] * A2 + b[1] * I);
      V = b[2] * A2 + b[0] * I;
      return;
    }
    case 5: {
      constexpr double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
      const MatrixType A4 = A2 * A2;
      U.noalias() = A * (b[5] * A4 + b[3] * A2 + b[1] * I);
      V = b[4] * A4 + b[2] * A2 + b[0] * I;
      return;
    }
    case 7: {
      constexpr double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                              25200.0,    1512.0,    56.0,      1.0};
      const MatrixType A4 = A2 * A2;
      const MatrixType A6 = A4 * A2;
      U.noalias() = A * (b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
      V = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
      return;
    }
    case 9: {
      constexpr double b[] = {17643225600.0, 8821612800.0, 2075673600.0,
                              302702400.0,   30270240.0,   2162160.0,
                              110880.0,      3960.0,       90.0,
                              1.0};
      const MatrixType A4 = A2 * A2;
      const MatrixType A6 = A4 * A2;
      const MatrixType A8 = A6 * A2;
      U.noalias() = A * (b[9] * A8 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
      V = b[8] * A8 + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
      return;
    }
    default: {
      constexpr double b[] = {64764752532480000.0, 32382376266240000.0,
                              7771770303897600.0,  1187353796428800.0,
                              129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,
                              1323241920.0,        40840800.0,
                              960960.0,            16380.0,
                              182.0,               1.0};
      const MatrixType A4 = A2 * A2;
      const MatrixType A6 = A4 * A2;
      MatrixType tmp = b[13] * A6 + b[11] * A4 + b[9] * A2;
      MatrixType inner = A6 * tmp;
      inner += b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
      U.noalias() = A * inner;
      tmp = b[12] * A6 + b[10] * A4 + b[8] * A2;
      V.noalias() = A6 * tmp;
      V += b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
      return;
    }
  }
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with a diagonal Pade
/// approximant of degree 3..13, degree and scaling chosen from the 1-norm
/// (Higham 2005 thresholds).
template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& input) {
  using MatrixType = typename Derived::PlainObject;
  const MatrixType A = input;
  const Eigen::Index n = A.rows();
  if (n == 0) return A;

  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  MatrixType U(n, n), V(n, n);

  constexpr int degrees[] = {3, 5, 7, 9};
  constexpr double thetas[] = {1.495585217958292e-2, 2.539398330063230e-1,
                               9.504178996162932e-1, 2.097847961257068e0};
  for (int i = 0; i < 4; ++i) {
    if (norm1 <= thetas[i]) {
      detail::pade_terms(degrees[i], A, U, V);
      return (V - U).partialPivLu().solve(V + U);
    }
  }

  constexpr double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  }
  const MatrixType scaled = A / std::ldexp(1.0, squarings);
  detail::pade_terms(13, scaled, U, V);
  MatrixType result = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) {
    result = (result * result).eval();
  }
  return result;
}

}  // namespace aoi::linalg
