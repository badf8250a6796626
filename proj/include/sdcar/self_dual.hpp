#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "sdcar/types.hpp"

namespace sdcar {

enum class Tag : int { Minus = 0, Plus = 1 };

/// One element of the label set: lattice point, spin index, particle/hole tag.
struct SiteLabel {
  std::vector<int> x;
  int spin = 0;
  Tag tag = Tag::Minus;

  auto key() const { return std::tie(x, spin, tag); }
  friend bool operator<(const SiteLabel& a, const SiteLabel& b) { return a.key() < b.key(); }
  friend bool operator==(const SiteLabel& a, const SiteLabel& b) { return a.key() == b.key(); }
};

/// Finite self-dual space. Gamma acts as v -> G conj(v); G is the permutation
/// swapping each (x, s, -) with (x, s, +). Labels are stored sorted, so the
/// minus label of mode j sits at index 2j and its partner at 2j+1.
class SelfDualSpace {
 public:
  SelfDualSpace() = default;

  int dim() const { return static_cast<int>(labels_.size()); }
  int modes() const { return dim() / 2; }
  const std::vector<SiteLabel>& labels() const { return labels_; }
  const Matrix& gamma_matrix() const { return gamma_; }
  /// Per-dimension torus period, 0 for open directions.
  const std::vector<int>& periods() const { return periods_; }
  int partner(int i) const { return i ^ 1; }

  std::optional<int> index_of(const SiteLabel& l) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), l);
    if (it == labels_.end() || !(*it == l)) return std::nullopt;
    return static_cast<int>(it - labels_.begin());
  }

  /// Lattice distance between the sites carrying labels i and j.
  double distance(int i, int j) const {
    const auto& a = labels_[i].x;
    const auto& b = labels_[j].x;
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      int d = std::abs(a[k] - b[k]);
      if (k < periods_.size() && periods_[k] > 0) d = std::min(d, periods_[k] - d);
      acc += static_cast<double>(d) * d;
    }
    return std::sqrt(acc);
  }

  Vector apply_gamma(const Vector& v) const {
    Vector out(v.size());
    for (int i = 0; i < dim(); ++i) out(i) = std::conj(v(partner(i)));
    return out;
  }

  /// Gamma A Gamma, which is again linear: G conj(A) G.
  Matrix conjugate(const Matrix& a) const {
    Matrix out(a.rows(), a.cols());
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) out(i, j) = std::conj(a(partner(i), partner(j)));
    return out;
  }

  /// Projection onto the minus labels.
  Matrix canonical_projection() const {
    Matrix p = Matrix::Zero(dim(), dim());
    for (int j = 0; j < modes(); ++j) p(2 * j, 2 * j) = 1.0;
    return p;
  }

  bool same_as(const SelfDualSpace& o) const { return labels_ == o.labels_; }

  friend SelfDualSpace make_space(std::vector<SiteLabel> labels, std::vector<int> periods);

 private:
  std::vector<SiteLabel> labels_;
  std::vector<int> periods_;
  Matrix gamma_;
};

inline SelfDualSpace make_space(std::vector<SiteLabel> labels, std::vector<int> periods = {}) {
  if (labels.empty()) throw Error(ErrorKind::UnpairedLabel, "empty label list");
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw Error(ErrorKind::UnpairedLabel, "duplicate label");
  }
  if (labels.size() % 2 != 0) throw Error(ErrorKind::UnpairedLabel, "odd number of labels");
  for (std::size_t j = 0; j < labels.size(); j += 2) {
    const auto& m = labels[j];
    const auto& p = labels[j + 1];
    if (m.tag != Tag::Minus || p.tag != Tag::Plus || m.x != p.x || m.spin != p.spin) {
      throw Error(ErrorKind::UnpairedLabel, "label without its partner at position " + std::to_string(j));
    }
  }
  SelfDualSpace s;
  s.labels_ = std::move(labels);
  s.periods_ = std::move(periods);
  const int n = s.dim();
  s.gamma_ = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) s.gamma_(i ^ 1, i) = 1.0;
  return s;
}

/// Space for `n` abstract modes at positions 0..n-1 on a line, spin 0.
inline SelfDualSpace make_mode_space(int n) {
  std::vector<SiteLabel> labels;
  for (int j = 0; j < n; ++j) {
    labels.push_back({{j}, 0, Tag::Minus});
    labels.push_back({{j}, 0, Tag::Plus});
  }
  return make_space(std::move(labels));
}

struct HamiltonianMeta {
  std::string model = "custom";
  std::uint64_t seed = 0;
  double s = 0.0;
  double hermitian_residual = 0.0;
  double self_dual_residual = 0.0;
};

struct Tolerances {
  double hermitian = 1e-10;
  double self_dual = 1e-10;
  double trace = 1e-9;
};

class SelfDualHamiltonian {
 public:
  SelfDualHamiltonian(std::shared_ptr<const SelfDualSpace> space, Matrix m, HamiltonianMeta meta)
      : space_(std::move(space)), matrix_(std::move(m)), meta_(std::move(meta)) {}

  const SelfDualSpace& space() const { return *space_; }
  std::shared_ptr<const SelfDualSpace> space_ptr() const { return space_; }
  const Matrix& matrix() const { return matrix_; }
  const HamiltonianMeta& meta() const { return meta_; }

 private:
  std::shared_ptr<const SelfDualSpace> space_;
  Matrix matrix_;
  HamiltonianMeta meta_;
};

/// (A - Gamma A Gamma)/2 with the Hermitian part taken first.
inline Matrix symmetrize_self_dual(const SelfDualSpace& space, const Matrix& a) {
  Matrix h = 0.5 * (a + a.adjoint());
  return 0.5 * (h - space.conjugate(h));
}

inline SelfDualHamiltonian validate_self_dual(std::shared_ptr<const SelfDualSpace> space, Matrix m,
                                              HamiltonianMeta meta = {}, Tolerances tol = {}) {
  const int n = space->dim();
  if (m.rows() != n || m.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "matrix is " + std::to_string(m.rows()) + "x" +
                                              std::to_string(m.cols()) + ", space dim " + std::to_string(n));
  }
  const double scale = std::max(op_norm(m), 1e-300);
  const double herm = op_norm(m - m.adjoint());
  if (herm > tol.hermitian * scale) throw Error(ErrorKind::NotHermitian, "H != H*", herm);
  const double sd = op_norm(m + space->conjugate(m));
  if (sd > tol.self_dual * scale) throw Error(ErrorKind::NotSelfDual, "H != -Gamma H Gamma", sd);
  const double tr = std::abs(m.trace());
  if (tr > tol.trace * scale * n) throw Error(ErrorKind::NotSelfDual, "trace not zero", tr);
  meta.hermitian_residual = herm;
  meta.self_dual_residual = sd;
  return SelfDualHamiltonian(std::move(space), std::move(m), std::move(meta));
}

inline SelfDualHamiltonian validate_self_dual(const SelfDualSpace& space, Matrix m, HamiltonianMeta meta = {},
                                              Tolerances tol = {}) {
  return validate_self_dual(std::make_shared<const SelfDualSpace>(space), std::move(m), std::move(meta), tol);
}

struct ProjectionCheck {
  double idempotence = 0.0;
  double hermiticity = 0.0;
  double duality = 0.0;
  double rank_defect = 0.0;
};

inline ProjectionCheck check_basis_projection(const SelfDualSpace& space, const Matrix& p) {
  ProjectionCheck c;
  c.idempotence = op_norm(p * p - p);
  c.hermiticity = op_norm(p - p.adjoint());
  c.duality = op_norm(space.conjugate(p) - (Matrix::Identity(p.rows(), p.cols()) - p));
  c.rank_defect = std::abs(p.trace().real() - space.modes());
  return c;
}

inline bool is_basis_projection(const SelfDualSpace& space, const Matrix& p) {
  if (p.rows() != space.dim() || p.cols() != space.dim()) return false;
  auto c = check_basis_projection(space, p);
  return c.idempotence <= 1e-10 && c.hermiticity <= 1e-10 && c.duality <= 1e-9 && c.rank_defect <= 1e-8;
}

struct BogoliubovTransform {
  Matrix U;
  int parity = 1;
  Complex det{1.0, 0.0};
  /// dim ker(P U P) restricted to ran P, when a projection was supplied.
  std::optional<int> kernel_dim;
};

inline Complex determinant(const Matrix& u) {
  if (u.size() == 0) return 1.0;
  return u.partialPivLu().determinant();
}

inline BogoliubovTransform bogoliubov_parity(const SelfDualSpace& space, const Matrix& u,
                                             const Matrix* basis_projection = nullptr) {
  const int n = space.dim();
  if (u.rows() != n || u.cols() != n) throw Error(ErrorKind::ShapeMismatch, "U has wrong shape");
  const double unit = op_norm(u.adjoint() * u - Matrix::Identity(n, n));
  if (unit > 1e-10) throw Error(ErrorKind::NotUnitary, "U*U != 1", unit);
  // U G = G conj(U)  <=>  U = Gamma U Gamma
  const double comm = op_norm(u - space.conjugate(u));
  if (comm > 1e-9) throw Error(ErrorKind::NotGammaCommuting, "U does not commute with Gamma", comm);
  BogoliubovTransform b;
  b.U = u;
  b.det = determinant(u);
  if (std::abs(b.det.imag()) > 1e-6) throw Error(ErrorKind::DetNotReal, "det U not real", b.det.imag());
  b.parity = b.det.real() >= 0 ? 1 : -1;
  if (basis_projection) {
    const Matrix& p = *basis_projection;
    // P U P on ran P: orthonormal basis of ran P from its eigenvectors.
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    const Matrix basis = es.eigenvectors().rightCols(space.modes());
    const Matrix block = basis.adjoint() * u * basis;
    Eigen::JacobiSVD<Matrix> svd(block);
    int k = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) < 1e-6) ++k;
    b.kernel_dim = k;
    const int kp = (k % 2 == 0) ? 1 : -1;
    if (kp != b.parity) {
      throw Error(ErrorKind::MethodDisagreement, "kernel parity disagrees with det U", k);
    }
  }
  return b;
}

namespace detail {
inline Matrix gaussian_matrix(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix a(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double re = nd(rng);
      double im = nd(rng);
      a(i, j) = Complex(re, im);
    }
  return a;
}
}  // namespace detail

inline SelfDualHamiltonian random_self_dual(std::shared_ptr<const SelfDualSpace> space, std::uint64_t seed,
                                            double norm_scale = 1.0) {
  if (!(norm_scale > 0)) throw Error(ErrorKind::InvalidArgument, "norm_scale must be positive");
  Matrix h = symmetrize_self_dual(*space, detail::gaussian_matrix(space->dim(), seed));
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
  h *= norm_scale / radius;
  HamiltonianMeta meta;
  meta.model = "random";
  meta.seed = seed;
  return validate_self_dual(std::move(space), std::move(h), meta);
}

/// exp(iD) for a random self-dual D: a Bogoliubov transformation in the identity component.
inline Matrix random_bogoliubov(const SelfDualSpace& space, std::uint64_t seed, double angle_scale = 1.0) {
  Matrix d = symmetrize_self_dual(space, detail::gaussian_matrix(space.dim(), seed));
  return hermitian_exp_i(d, angle_scale);
}

/// Swap of the minus and plus labels of one mode: det = -1.
inline Matrix mode_swap(const SelfDualSpace& space, int mode = 0) {
  Matrix r = Matrix::Identity(space.dim(), space.dim());
  const int a = 2 * mode;
  r(a, a) = 0.0;
  r(a + 1, a + 1) = 0.0;
  r(a, a + 1) = 1.0;
  r(a + 1, a) = 1.0;
  return r;
}

}  // namespace sdcar
