#include <gtest/gtest.h>

#include "sdcar/lattice.hpp"
#include "sdcar/self_dual.hpp"

using namespace sdcar;

namespace {

std::shared_ptr<const SelfDualSpace> modes(int n) { return std::make_shared<const SelfDualSpace>(make_mode_space(n)); }

Vector random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(nd(rng), nd(rng));
  return v;
}

}  // namespace

TEST(MakeSpace, SinglePairGivesSwap) {
  auto s = make_space({{{0}, 0, Tag::Plus}, {{0}, 0, Tag::Minus}});
  ASSERT_EQ(s.dim(), 2);
  Matrix g(2, 2);
  g << 0, 1, 1, 0;
  EXPECT_EQ(s.gamma_matrix(), g);
  EXPECT_EQ(s.labels()[0].tag, Tag::Minus);
}

TEST(MakeSpace, UnitChainHasSixLabels) {
  LatticeConfig c;
  c.L = 1;
  EXPECT_EQ(build_box_space(c).dim(), 6);
}

TEST(MakeSpace, MissingPartnerIsRejected) {
  try {
    make_space({{{0}, 0, Tag::Minus}, {{1}, 0, Tag::Plus}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnpairedLabel);
  }
  EXPECT_THROW(make_space({{{0}, 0, Tag::Minus}}), Error);
}

TEST(MakeSpace, GammaInvariants) {
  LatticeConfig c;
  c.d = 2;
  c.L = 1;
  c.spins = 2;
  auto s = build_box_space(c);
  const Matrix& G = s.gamma_matrix();
  const int n = s.dim();
  EXPECT_LE(op_norm(G.adjoint() * G - Matrix::Identity(n, n)), 1e-12);
  EXPECT_LE(op_norm(G * G.conjugate() - Matrix::Identity(n, n)), 1e-12);
  const Vector v = random_vector(n, 7);
  EXPECT_LE((s.apply_gamma(s.apply_gamma(v)) - v).norm(), 1e-14);
  // apply_gamma is G conj(v)
  EXPECT_LE((s.apply_gamma(v) - G * v.conjugate()).norm(), 1e-14);
}

TEST(ValidateSelfDual, DiagonalPair) {
  auto sp = modes(1);
  Matrix h(2, 2);
  h << 0.7, 0, 0, -0.7;
  EXPECT_NO_THROW(validate_self_dual(sp, h));
  h(1, 1) = 0.7;
  try {
    validate_self_dual(sp, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSelfDual);
    EXPECT_GT(e.residual(), 1.0);
  }
}

TEST(ValidateSelfDual, NonHermitianRejected) {
  auto sp = modes(1);
  Matrix h(2, 2);
  h << 0, 1, 0, 0;
  try {
    validate_self_dual(sp, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotHermitian);
  }
}

TEST(ValidateSelfDual, SymmetrizationIsExactAndIdempotent) {
  auto sp = modes(5);
  Matrix a = detail::gaussian_matrix(10, 3);
  a = a + a.adjoint();
  const Matrix h = symmetrize_self_dual(*sp, a);
  auto v = validate_self_dual(sp, h);
  EXPECT_LE(v.meta().hermitian_residual, 1e-12);
  EXPECT_LE(v.meta().self_dual_residual, 1e-12);
  EXPECT_LE(op_norm(symmetrize_self_dual(*sp, h) - h), 1e-14);
}

TEST(ValidateSelfDual, ShapeMismatch) {
  try {
    validate_self_dual(modes(2), Matrix::Zero(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(RandomSelfDual, Deterministic) {
  auto sp = modes(4);
  EXPECT_EQ(random_self_dual(sp, 11).matrix(), random_self_dual(sp, 11).matrix());
  EXPECT_NE(random_self_dual(sp, 11).matrix(), random_self_dual(sp, 12).matrix());
}

TEST(RandomSelfDual, SpectrumSymmetric) {
  auto sp = modes(6);
  for (unsigned seed = 0; seed < 20; ++seed) {
    auto h = random_self_dual(sp, seed);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix(), Eigen::EigenvaluesOnly);
    const RealVector l = es.eigenvalues();
    EXPECT_LE((l + l.reverse()).cwiseAbs().maxCoeff(), 1e-10) << seed;
  }
}

TEST(RandomSelfDual, NormScaleIsLinear) {
  auto sp = modes(3);
  auto a = random_self_dual(sp, 5, 0.5);
  auto b = random_self_dual(sp, 5, 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a.matrix(), Eigen::EigenvaluesOnly), eb(b.matrix(), Eigen::EigenvaluesOnly);
  EXPECT_NEAR(eb.eigenvalues().cwiseAbs().maxCoeff(), 2 * ea.eigenvalues().cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(eb.eigenvalues().cwiseAbs().maxCoeff(), 1.0, 1e-12);
  EXPECT_THROW(random_self_dual(sp, 5, 0.0), Error);
}

TEST(BogoliubovParity, IdentityAndSwap) {
  auto sp = make_mode_space(1);
  EXPECT_EQ(bogoliubov_parity(sp, Matrix::Identity(2, 2)).parity, 1);
  EXPECT_EQ(bogoliubov_parity(sp, sp.gamma_matrix()).parity, -1);
}

TEST(BogoliubovParity, RandomExponentialIsEven) {
  auto sp = make_mode_space(4);
  const Matrix P = sp.canonical_projection();
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Matrix U = random_bogoliubov(sp, seed);
    auto b = bogoliubov_parity(sp, U, &P);
    // independent determinant: product of the unitary's eigenvalues
    Eigen::ComplexEigenSolver<Matrix> es(U);
    Complex prod = 1.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) prod *= es.eigenvalues()(i);
    EXPECT_NEAR(prod.real(), 1.0, 1e-8);
    EXPECT_NEAR(prod.imag(), 0.0, 1e-8);
    EXPECT_EQ(b.parity, 1);
    ASSERT_TRUE(b.kernel_dim.has_value());
    EXPECT_EQ(*b.kernel_dim % 2, 0);
  }
}

TEST(BogoliubovParity, KernelParityFollowsSwap) {
  auto sp = make_mode_space(3);
  const Matrix P = sp.canonical_projection();
  const Matrix U = random_bogoliubov(sp, 4, 0.05) * mode_swap(sp, 1);
  auto b = bogoliubov_parity(sp, U, &P);
  EXPECT_EQ(b.parity, -1);
  EXPECT_EQ(*b.kernel_dim, 1);
}

TEST(BogoliubovParity, Multiplicative) {
  auto sp = make_mode_space(3);
  for (unsigned seed = 0; seed < 8; ++seed) {
    Matrix u1 = random_bogoliubov(sp, seed);
    Matrix u2 = random_bogoliubov(sp, seed + 100);
    if (seed % 2) u1 = u1 * mode_swap(sp, 0);
    if (seed % 4 >= 2) u2 = mode_swap(sp, 2) * u2;
    const int p1 = bogoliubov_parity(sp, u1).parity;
    const int p2 = bogoliubov_parity(sp, u2).parity;
    EXPECT_EQ(bogoliubov_parity(sp, u1 * u2).parity, p1 * p2);
  }
}

TEST(BogoliubovParity, Errors) {
  auto sp = make_mode_space(1);
  Matrix bad(2, 2);
  bad << 1, 0, 0, 2;
  try {
    bogoliubov_parity(sp, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotUnitary);
  }
  Matrix phase(2, 2);
  phase << Complex(0, 1), 0, 0, 1;  // unitary, but Gamma would need conj(i) on the partner
  try {
    bogoliubov_parity(sp, phase);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotGammaCommuting);
  }
}

TEST(BasisProjection, CanonicalAndRotated) {
  auto sp = make_mode_space(4);
  const Matrix P = sp.canonical_projection();
  EXPECT_TRUE(is_basis_projection(sp, P));
  const Matrix U = random_bogoliubov(sp, 9);
  const Matrix Q = U * P * U.adjoint();
  auto c = check_basis_projection(sp, Q);
  EXPECT_LE(c.duality, 1e-9);
  EXPECT_LE(c.idempotence, 1e-10);
  EXPECT_FALSE(is_basis_projection(sp, Matrix::Identity(8, 8)));
}
