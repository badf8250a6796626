#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "sdcar/pfaffian.hpp"
#include "sdcar/self_dual.hpp"
#include "sdcar/spectral.hpp"

namespace sdcar {

/// Two-point operator S of a quasi-free state: omega(B(f) B(g)*) = <f, S g>.
struct Symbol {
  std::shared_ptr<const SelfDualSpace> space;
  Matrix S;
};

inline Symbol make_symbol(std::shared_ptr<const SelfDualSpace> space, Matrix s, double tol = 1e-9) {
  const int n = space->dim();
  if (s.rows() != n || s.cols() != n) throw Error(ErrorKind::ShapeMismatch, "symbol has wrong shape");
  const double herm = op_norm(s - s.adjoint());
  if (herm > 1e-10) throw Error(ErrorKind::NotSymbol, "symbol is not Hermitian", herm);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.adjoint()), Eigen::EigenvaluesOnly);
  if (n > 0 && (es.eigenvalues().minCoeff() < -1e-10 || es.eigenvalues().maxCoeff() > 1 + 1e-10)) {
    throw Error(ErrorKind::NotSymbol, "symbol is not a positive contraction");
  }
  const double dual = op_norm(s + space->conjugate(s) - Matrix::Identity(n, n));
  if (dual > tol) throw Error(ErrorKind::NotSymbol, "S + Gamma S Gamma != 1", dual);
  return Symbol{std::move(space), std::move(s)};
}

inline Symbol tracial_symbol(std::shared_ptr<const SelfDualSpace> space) {
  const int n = space->dim();
  return make_symbol(std::move(space), 0.5 * Matrix::Identity(n, n));
}

/// (1 + e^{-beta H})^{-1}, evaluated as 1/2 + tanh(beta H / 2)/2 so beta = 0 is exact.
inline Symbol gibbs_symbol(const SelfDualHamiltonian& h, double beta) {
  if (beta < 0) throw Error(ErrorKind::InvalidArgument, "beta must be >= 0", beta);
  const auto r = resolve(h);
  Vector f(r.dim());
  for (int k = 0; k < r.dim(); ++k) f(k) = 0.5 * std::tanh(0.5 * beta * r.eigenvalues(k));
  Matrix s = r.eigenvectors * f.asDiagonal() * r.eigenvectors.adjoint();
  s.diagonal().array() += 0.5;
  return make_symbol(h.space_ptr(), std::move(s));
}

inline Symbol ground_symbol(std::shared_ptr<const SelfDualSpace> space, const SpectralResolution& r) {
  if (gap_closed(r)) throw Error(ErrorKind::GapClosed, "ground state not unique (E_0 != 0)", r.min_abs_eigenvalue);
  return make_symbol(std::move(space), r.E_plus);
}

struct Factor {
  Vector phi;
  bool star = false;
};

using Monomial = std::vector<Factor>;

/// m* : reversed order, stars toggled.
inline Monomial adjoint(const Monomial& m) {
  Monomial out(m.rbegin(), m.rend());
  for (auto& f : out) f.star = !f.star;
  return out;
}

/// Pfaffian formula. B(f)* is rewritten as B(Gamma f); omega(B(a)B(b)) = <a, S Gamma b>.
inline Complex evaluate(const Symbol& st, const Monomial& m) {
  const auto& sp = *st.space;
  for (const auto& f : m)
    if (f.phi.size() != sp.dim()) throw Error(ErrorKind::SpaceMismatch, "factor vector not in the state's space");
  if (m.size() % 2 != 0) return 0.0;
  const int n = static_cast<int>(m.size());
  std::vector<Vector> psi;
  psi.reserve(n);
  for (const auto& f : m) psi.push_back(f.star ? sp.apply_gamma(f.phi) : f.phi);
  std::vector<Vector> right;
  right.reserve(n);
  for (const auto& p : psi) right.push_back(st.S * sp.apply_gamma(p));
  Matrix M = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      M(k, l) = psi[k].dot(right[l]);  // dot conjugates the left argument
      M(l, k) = -M(k, l);
    }
  return pfaffian(M);
}

using StateFn = std::function<Complex(const Monomial&)>;

inline StateFn as_state(const Symbol& s) {
  return [s](const Monomial& m) { return evaluate(s, m); };
}

inline Vector basis_vector(int dim, int i) {
  Vector v = Vector::Zero(dim);
  v(i) = 1.0;
  return v;
}

/// Separating family: B(e_i)B(e_j)* in lexicographic (i, j), then
/// B(e_i)B(e_j)*B(e_k)B(e_l)* for i<j<k<l, truncated at n_max.
inline std::vector<Monomial> observable_family(int dim, int n_max = 64) {
  std::vector<Monomial> out;
  for (int i = 0; i < dim && static_cast<int>(out.size()) < n_max; ++i)
    for (int j = 0; j < dim && static_cast<int>(out.size()) < n_max; ++j)
      out.push_back({{basis_vector(dim, i), false}, {basis_vector(dim, j), true}});
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      for (int k = j + 1; k < dim; ++k)
        for (int l = k + 1; l < dim; ++l) {
          if (static_cast<int>(out.size()) >= n_max) return out;
          out.push_back({{basis_vector(dim, i), false},
                         {basis_vector(dim, j), true},
                         {basis_vector(dim, k), false},
                         {basis_vector(dim, l), true}});
        }
  return out;
}

struct WeakStar {
  double distance = 0.0;
  int first_separating = 0;  // 1-based index m of the first A_m with |difference| > threshold, 0 if none
  double first_difference = 0.0;
  double lower_bound = 0.0;  // first_difference / 2^m
};

inline WeakStar weakstar_distance(const StateFn& w1, const StateFn& w2, const std::vector<Monomial>& family,
                                  double threshold = 1e-8) {
  WeakStar out;
  double weight = 1.0;
  for (std::size_t n = 0; n < family.size(); ++n) {
    weight *= 0.5;
    const double diff = std::abs(w1(family[n]) - w2(family[n]));
    out.distance += weight * diff;
    if (out.first_separating == 0 && diff > threshold) {
      out.first_separating = static_cast<int>(n + 1);
      out.first_difference = diff;
      out.lower_bound = diff * weight;
    }
  }
  return out;
}

inline WeakStar weakstar_distance(const Symbol& a, const Symbol& b, int n_max = 64) {
  return weakstar_distance(as_state(a), as_state(b), observable_family(a.space->dim(), n_max));
}

}  // namespace sdcar
