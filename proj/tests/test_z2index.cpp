#include <gtest/gtest.h>

#include "sdcar/lattice.hpp"
#include "sdcar/spectral.hpp"
#include "sdcar/z2index.hpp"

using namespace sdcar;

TEST(Intersection, EqualProjections) {
  auto sp = make_mode_space(3);
  const Matrix P = sp.canonical_projection();
  EXPECT_EQ(intersection_dim(P, Matrix::Identity(6, 6) - P).dim, 0);
  EXPECT_EQ(z2_index(sp, P, P).sigma, 1);
}

TEST(Intersection, OneModeFlip) {
  auto sp = make_mode_space(1);
  Matrix P1 = Matrix::Zero(2, 2), P2 = Matrix::Zero(2, 2);
  P1(0, 0) = 1;
  P2(1, 1) = 1;
  EXPECT_EQ(intersection_dim(P1, Matrix::Identity(2, 2) - P2).dim, 1);
  auto r = z2_index(sp, P1, P2);
  EXPECT_EQ(r.sigma, -1);
  EXPECT_EQ(r.kernel_dim, 2);
}

TEST(Intersection, ComplementHasParityOfN) {
  for (int n : {1, 2, 3, 4}) {
    auto sp = make_mode_space(n);
    const Matrix P = sp.canonical_projection();
    auto r = z2_index(sp, P, sp.conjugate(P));
    EXPECT_EQ(r.dim_intersection, n);
    EXPECT_EQ(r.sigma, n % 2 == 0 ? 1 : -1);
  }
}

TEST(Intersection, AmbiguousBandIsRefused) {
  // one eigenvalue of P1 P2perp P1 at 1 - 1e-4
  Matrix P1 = Matrix::Zero(2, 2);
  P1(0, 0) = 1;
  const double c2 = 1e-4;
  Vector v(2);
  v << std::sqrt(1 - c2), std::sqrt(c2);
  Matrix P2perp = v * v.adjoint();
  try {
    intersection_dim(P1, P2perp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IllConditioned);
  }
}

TEST(Intersection, ConditioningWarning) {
  Matrix P1 = Matrix::Zero(2, 2);
  P1(0, 0) = 1;
  Vector v(2);
  v << std::sqrt(0.5), std::sqrt(0.5);
  auto c = intersection_dim(P1, v * v.adjoint());
  EXPECT_TRUE(c.warning);
  EXPECT_EQ(c.dim, 0);
  EXPECT_NEAR(c.conditioning, 0.5, 1e-12);
}

TEST(Z2Index, RandomPairsAllMethods) {
  for (int n : {2, 3, 5, 8}) {
    auto sp = make_mode_space(n);
    for (unsigned seed = 0; seed < 10; ++seed) {
      const Matrix W = random_bogoliubov(sp, 1000 + seed);
      const Matrix P1 = W * sp.canonical_projection() * W.adjoint();
      Matrix U = random_bogoliubov(sp, seed);
      if (seed % 2) U = U * mode_swap(sp, static_cast<int>(seed) % n);
      const Matrix P2 = U.adjoint() * P1 * U;
      auto r = z2_index(sp, P1, P2, &U);
      ASSERT_TRUE(r.sigma_det.has_value());
      EXPECT_EQ(r.sigma, *r.sigma_det);
      EXPECT_EQ(r.kernel_dim, 2 * r.dim_intersection);
      EXPECT_EQ(r.sigma, seed % 2 ? -1 : 1);
      // symmetric in its arguments
      EXPECT_EQ(z2_index(sp, P2, P1).sigma, r.sigma);
    }
  }
}

TEST(Z2Index, ConjugationInvariance) {
  auto sp = make_mode_space(4);
  const Matrix P1 = sp.canonical_projection();
  const Matrix U = random_bogoliubov(sp, 3) * mode_swap(sp, 2);
  const Matrix P2 = U.adjoint() * P1 * U;
  const Matrix W = random_bogoliubov(sp, 44) * mode_swap(sp, 1);
  EXPECT_EQ(z2_index(sp, W * P1 * W.adjoint(), W * P2 * W.adjoint()).sigma, z2_index(sp, P1, P2).sigma);
}

TEST(Z2Index, SmallRotationKeepsSign) {
  auto sp = make_mode_space(3);
  const Matrix P1 = sp.canonical_projection();
  const Matrix U = random_bogoliubov(sp, 8) * mode_swap(sp, 0);
  const Matrix P2 = U.adjoint() * P1 * U;
  auto base = z2_index(sp, P1, P2);
  ASSERT_GT(base.conditioning, 1e-2);
  const Matrix R = random_bogoliubov(sp, 9, 1e-3);
  EXPECT_EQ(z2_index(sp, P1, R.adjoint() * P2 * R).sigma, base.sigma);
}

TEST(Z2Index, RejectsNonBasisProjection) {
  auto sp = make_mode_space(2);
  try {
    z2_index(sp, Matrix::Identity(4, 4), sp.canonical_projection());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotBasisProjection);
  }
}

TEST(Z2Index, WrongUnitaryIsCaught) {
  auto sp = make_mode_space(2);
  const Matrix P1 = sp.canonical_projection();
  const Matrix U = random_bogoliubov(sp, 1);
  const Matrix P2 = U.adjoint() * P1 * U;
  const Matrix bad = random_bogoliubov(sp, 2);
  EXPECT_THROW(z2_index(sp, P1, P2, &bad), Error);
}

TEST(PfaffianParity, AgreesWithIndexAcrossKitaevPhases) {
  const int n = 8;
  auto sp = build_chain_space(n, Boundary::Periodic);
  auto ref = build_kitaev_chain(n, 1.0, 0.5, 1.0, Boundary::Periodic);
  const Matrix E0 = resolve(ref).E_plus;
  const int p0 = pfaffian_parity(sp, ref.matrix());
  for (double mu : {-3.0, -1.0, 0.3, 1.5, 3.0}) {
    auto h = build_kitaev_chain(n, 1.0, mu, 1.0, Boundary::Periodic);
    auto r = resolve(h);
    const int sigma = z2_index(sp, E0, r.E_plus).sigma;
    EXPECT_EQ(sigma, p0 * pfaffian_parity(sp, h.matrix())) << mu;
    EXPECT_EQ(sigma, std::abs(mu) < 2 ? 1 : -1) << mu;
  }
}

TEST(PfaffianParity, MajoranaFormIsReal) {
  auto sp = std::make_shared<const SelfDualSpace>(make_mode_space(4));
  auto h = random_self_dual(sp, 2);
  const Matrix w = majorana_basis(*sp);
  const Matrix x = w.adjoint() * h.matrix() * w;
  EXPECT_LE(x.real().cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(op_norm(w.adjoint() * w - Matrix::Identity(8, 8)), 1e-15);
}
