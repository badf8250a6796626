#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sdcar/pfaffian.hpp"
#include "sdcar/self_dual.hpp"

namespace sdcar {

struct IndexTolerances {
  double one = 1e-6;      // eigenvalue of P1 P2^perp P1 counted as 1
  double kernel = 1e-6;   // eigenvalue of P1 + P2 - 1 counted as 0
  double ambiguity = 1e-3;  // (1 - ambiguity, 1 - one) is refused
  double map = 1e-8;        // ||U* P1 U - P2|| allowed for a supplied U
};

struct IntersectionCount {
  int dim = 0;
  double conditioning = 1.0;  // distance of the uncounted spectrum to {0, 1}
  bool warning = false;       // some eigenvalue in (0.1, 0.9)
};

/// dim(ran P1 ∩ ran P2perp) from the eigenvalues of P1 P2perp P1 near 1.
inline IntersectionCount intersection_dim(const Matrix& P1, const Matrix& P2perp, IndexTolerances tol = {}) {
  if (P1.rows() != P2perp.rows() || P1.cols() != P2perp.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "projections act on different spaces");
  }
  Matrix m = P1 * P2perp * P1;
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::EigensolverFailure, "P1 P2perp P1");
  IntersectionCount c;
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    const double l = es.eigenvalues()(k);
    if (std::abs(1.0 - l) <= tol.one) {
      ++c.dim;
      continue;
    }
    if (l > 1.0 - tol.ambiguity && l < 1.0 - tol.one) {
      throw Error(ErrorKind::IllConditioned, "eigenvalue " + std::to_string(l) + " too close to 1 to classify",
                  1.0 - l);
    }
    if (std::abs(l) > tol.one) c.conditioning = std::min(c.conditioning, std::min(std::abs(l), std::abs(1.0 - l)));
    if (l > 0.1 && l < 0.9) c.warning = true;
  }
  return c;
}

struct IndexReport {
  int sigma = 1;
  int dim_intersection = 0;
  int kernel_dim = 0;
  double conditioning = 1.0;
  bool conditioning_warning = false;
  std::optional<int> sigma_det;  // method (C), when U was supplied
  bool methods_agree = true;
};

/// dim ker(P1 + P2 - 1).
inline int kernel_dim(const Matrix& P1, const Matrix& P2, IndexTolerances tol = {}) {
  const int n = static_cast<int>(P1.rows());
  Matrix m = P1 + P2 - Matrix::Identity(n, n);
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  int k = 0;
  for (int i = 0; i < n; ++i)
    if (std::abs(es.eigenvalues()(i)) <= tol.kernel) ++k;
  return k;
}

/// sigma(P1, P2) = (-1)^{dim(P1 ∧ P2perp)}, cross-checked against the kernel of
/// P1 + P2 - 1 and, when U with P2 = U* P1 U is given, against sign det U.
inline IndexReport z2_index(const SelfDualSpace& space, const Matrix& P1, const Matrix& P2,
                            const Matrix* U = nullptr, IndexTolerances tol = {}) {
  if (!is_basis_projection(space, P1)) throw Error(ErrorKind::NotBasisProjection, "P1 is not a basis projection");
  if (!is_basis_projection(space, P2)) throw Error(ErrorKind::NotBasisProjection, "P2 is not a basis projection");
  const int n = space.dim();
  IndexReport r;
  const auto c = intersection_dim(P1, Matrix::Identity(n, n) - P2, tol);
  r.dim_intersection = c.dim;
  r.conditioning = c.conditioning;
  r.conditioning_warning = c.warning;
  r.sigma = (c.dim % 2 == 0) ? 1 : -1;
  r.kernel_dim = kernel_dim(P1, P2, tol);
  if (r.kernel_dim % 2 != 0) {
    throw Error(ErrorKind::MethodDisagreement, "odd kernel dimension " + std::to_string(r.kernel_dim),
                r.kernel_dim);
  }
  const int sigma_kernel = (r.kernel_dim / 2 % 2 == 0) ? 1 : -1;
  r.methods_agree = sigma_kernel == r.sigma && r.kernel_dim == 2 * r.dim_intersection;
  if (U) {
    const auto b = bogoliubov_parity(space, *U);
    r.sigma_det = b.parity;
    if (op_norm(U->adjoint() * P1 * (*U) - P2) > tol.map) {
      throw Error(ErrorKind::InvalidArgument, "supplied U does not map P1 to P2");
    }
    r.methods_agree = r.methods_agree && b.parity == r.sigma;
  }
  if (!r.methods_agree) {
    throw Error(ErrorKind::MethodDisagreement,
                "intersection " + std::to_string(r.dim_intersection) + ", kernel " + std::to_string(r.kernel_dim) +
                    (r.sigma_det ? ", det sign " + std::to_string(*r.sigma_det) : std::string()));
  }
  return r;
}

/// Change of basis to Gamma-real (Majorana) vectors: per mode
/// (e_- + e_+)/sqrt2 and i(e_- - e_+)/sqrt2.
inline Matrix majorana_basis(const SelfDualSpace& space) {
  const int n = space.dim();
  Matrix w = Matrix::Zero(n, n);
  const double r = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < space.modes(); ++j) {
    w(2 * j, 2 * j) = r;
    w(2 * j + 1, 2 * j) = r;
    w(2 * j, 2 * j + 1) = Complex(0, r);
    w(2 * j + 1, 2 * j + 1) = Complex(0, -r);
  }
  return w;
}

/// Real antisymmetric form A = -i W* H W of a self-dual H.
inline RealMatrix majorana_form(const SelfDualSpace& space, const Matrix& h) {
  const Matrix w = majorana_basis(space);
  const Matrix x = -kI * (w.adjoint() * h * w);
  RealMatrix a = x.real();
  return 0.5 * (a - a.transpose());
}

/// Sign of Pf of the Majorana form: flips each time a pair of eigenvalues crosses zero.
inline int pfaffian_parity(const SelfDualSpace& space, const Matrix& h) {
  const Complex pf = pfaffian(majorana_form(space, h).cast<Complex>());
  return pf.real() >= 0 ? 1 : -1;
}

}  // namespace sdcar
