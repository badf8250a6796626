#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "sdcar/types.hpp"

namespace sdcar {

inline void check_skew(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "Pfaffian of a non-square matrix");
  if (m.rows() % 2 != 0) throw Error(ErrorKind::OddDimension, "Pfaffian of an odd-dimensional matrix", m.rows());
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double r = (m + m.transpose()).cwiseAbs().maxCoeff();
  if (r > tol * scale) throw Error(ErrorKind::NotSkew, "M + M^T != 0", r);
}

/// Parlett-Reid reduction with partial pivoting. Pf of the 0x0 matrix is 1.
inline Complex pfaffian(const Matrix& m, double skew_tol = 1e-9) {
  check_skew(m, skew_tol);
  const int n = static_cast<int>(m.rows());
  Matrix a = 0.5 * (m - m.transpose());
  Complex result = 1.0;
  for (int k = 0; k + 1 < n; k += 2) {
    Eigen::Index off = 0;
    a.col(k).segment(k + 1, n - k - 1).cwiseAbs().maxCoeff(&off);
    const int kp = k + 1 + static_cast<int>(off);
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      result = -result;
    }
    if (a(k + 1, k) == Complex(0.0)) return 0.0;
    result *= a(k, k + 1);
    if (k + 2 < n) {
      const int r = n - k - 2;
      const Vector tau = a.row(k).segment(k + 2, r).transpose() / a(k, k + 1);
      const Vector col = a.col(k + 1).segment(k + 2, r);
      a.block(k + 2, k + 2, r, r).noalias() += tau * col.transpose() - col * tau.transpose();
      // the update is skew in exact arithmetic; keep it that way
      auto blk = a.block(k + 2, k + 2, r, r);
      Matrix s = 0.5 * (Matrix(blk) - Matrix(blk).transpose());
      blk = s;
    }
  }
  return result;
}

/// Pf(A) = 1/(2^N N!) sum over S_{2N} of sgn(p) prod A_{p(2i) p(2i+1)}. Only for 2N <= 8.
inline Complex pfaffian_permutation_sum(const Matrix& m) {
  check_skew(m, 1e-9);
  const int n = static_cast<int>(m.rows());
  if (n > 8) throw Error(ErrorKind::TooManyModes, "permutation sum limited to 8x8", n);
  if (n == 0) return 1.0;
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  Complex acc = 0.0;
  do {
    // sign via inversion count
    int inv = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (p[i] > p[j]) ++inv;
    Complex term = (inv % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < n; i += 2) term *= m(p[i], p[i + 1]);
    acc += term;
  } while (std::next_permutation(p.begin(), p.end()));
  double norm = 1.0;
  for (int i = 1; i <= n / 2; ++i) norm *= 2.0 * i;
  return acc / norm;
}

}  // namespace sdcar
