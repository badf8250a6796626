#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "sdcar/quasi_free.hpp"

namespace sdcar {

/// Dense Fock representation for a basis projection P, at most 10 modes.
/// Basis states are occupation bitstrings; a_j^* picks up (-1)^{#occupied modes below j}.
class FockOracle {
 public:
  FockOracle(std::shared_ptr<const SelfDualSpace> space, const Matrix& P) : space_(std::move(space)) {
    n_ = space_->modes();
    if (n_ > 10) throw Error(ErrorKind::TooManyModes, "Fock oracle limited to 10 modes", n_);
    if (!is_basis_projection(*space_, P)) throw Error(ErrorKind::NotBasisProjection, "P is not a basis projection");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P + P.adjoint()));
    psi_ = es.eigenvectors().rightCols(n_);
    build_ladder();
  }

  /// Oracle for the canonical projection: psi_j = e_{2j}.
  explicit FockOracle(std::shared_ptr<const SelfDualSpace> space) : space_(std::move(space)) {
    n_ = space_->modes();
    if (n_ > 10) throw Error(ErrorKind::TooManyModes, "Fock oracle limited to 10 modes", n_);
    psi_ = Matrix::Zero(space_->dim(), n_);
    for (int j = 0; j < n_; ++j) psi_(2 * j, j) = 1.0;
    build_ladder();
  }

  int modes() const { return n_; }
  int fock_dim() const { return 1 << n_; }
  const Matrix& annihilator(int j) const { return a_[j]; }
  Matrix creator(int j) const { return a_[j].adjoint(); }

  Vector vacuum() const {
    Vector v = Vector::Zero(fock_dim());
    v(0) = 1.0;
    return v;
  }

  /// pi_P(B(phi)) = a(P phi) + a*(Gamma P^perp phi).
  Matrix field(const Vector& phi) const {
    const Vector gphi = space_->apply_gamma(phi);
    Matrix out = Matrix::Zero(fock_dim(), fock_dim());
    for (int j = 0; j < n_; ++j) {
      const Complex c_ann = std::conj(psi_.col(j).dot(phi));
      const Complex c_cre = psi_.col(j).dot(gphi);
      out += c_ann * a_[j] + c_cre * a_[j].adjoint();
    }
    return out;
  }

  Matrix field(const Factor& f) const {
    Matrix b = field(f.phi);
    return f.star ? Matrix(b.adjoint()) : b;
  }

  Matrix represent(const Monomial& m) const {
    Matrix out = Matrix::Identity(fock_dim(), fock_dim());
    for (const auto& f : m) out = out * field(f);
    return out;
  }

  Complex vacuum_expectation(const Monomial& m) const {
    const Vector o = vacuum();
    return o.dot(represent(m) * o);
  }

  Complex expectation(const Vector& state, const Monomial& m) const { return state.dot(represent(m) * state); }

  Complex expectation(const Matrix& rho, const Monomial& m) const { return (rho * represent(m)).trace(); }

  /// <B, H B> = sum_ij <e_i, H e_j> B(e_j) B(e_i)*.
  Matrix bilinear(const Matrix& H) const {
    const int d = space_->dim();
    std::vector<Matrix> b(d);
    for (int i = 0; i < d; ++i) b[i] = field(basis_vector(d, i));
    Matrix out = Matrix::Zero(fock_dim(), fock_dim());
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (H(i, j) != Complex(0.0)) out += H(i, j) * b[j] * b[i].adjoint();
    return out;
  }

  /// e^{(beta/2) <B,HB>} / Z.
  Matrix gibbs_density(const Matrix& H, double beta) const {
    const Matrix X = bilinear(H);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (X + X.adjoint()));
    const double top = es.eigenvalues().maxCoeff();
    Vector w = (0.5 * beta * (es.eigenvalues().array() - top)).exp().cast<Complex>();
    Matrix rho = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
    return rho / rho.trace();
  }

  /// Top eigenvector of <B,HB>; unique when H is gapped.
  Vector ground_state(const Matrix& H) const {
    const Matrix X = bilinear(H);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (X + X.adjoint()));
    return es.eigenvectors().col(fock_dim() - 1);
  }

 private:
  void build_ladder() {
    const int D = fock_dim();
    a_.assign(n_, Matrix::Zero(D, D));
    for (int j = 0; j < n_; ++j)
      for (std::uint32_t b = 0; b < static_cast<std::uint32_t>(D); ++b) {
        if (b & (1u << j)) continue;
        const int sign = (std::popcount(b & ((1u << j) - 1u)) % 2 == 0) ? 1 : -1;
        // a_j^* |b> = sign |b + j>, so a_j has the transposed entry
        a_[j](b, b | (1u << j)) = static_cast<double>(sign);
      }
  }

  std::shared_ptr<const SelfDualSpace> space_;
  int n_ = 0;
  Matrix psi_;
  std::vector<Matrix> a_;
};

}  // namespace sdcar
