#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sdcar/lattice.hpp"
#include "sdcar/spectral.hpp"

using namespace sdcar;

namespace {
LatticeConfig chain(int L, Boundary b = Boundary::Open) {
  LatticeConfig c;
  c.L = L;
  c.boundary = b;
  return c;
}

RealVector sorted_eigs(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}
}  // namespace

TEST(BoxSpace, Dimensions) {
  EXPECT_EQ(build_box_space(chain(0)).dim(), 2);
  LatticeConfig c;
  c.d = 2;
  c.L = 1;
  EXPECT_EQ(build_box_space(c).dim(), 18);
  c.d = 1;
  c.L = 2;
  c.spins = 2;
  EXPECT_EQ(build_box_space(c).dim(), 20);
}

TEST(BoxSpace, RejectsBadConfig) {
  LatticeConfig c;
  c.epsilon = 1.5;
  EXPECT_THROW(build_box_space(c), Error);
  c.epsilon = 1.0;
  c.spins = 0;
  EXPECT_THROW(build_box_space(c), Error);
}

TEST(Laplacian, DegreeOnly) {
  RealMatrix lap = build_laplacian(chain(1), 0.0);
  RealMatrix want = RealMatrix::Zero(3, 3);
  want.diagonal() << 1, 2, 1;
  EXPECT_EQ(lap, want);
}

TEST(Laplacian, PathGraphClosedForm) {
  // path graph on n vertices: eigenvalues 2 - 2 cos(k pi / n), k = 0..n-1
  for (int L : {1, 3, 6}) {
    const int n = 2 * L + 1;
    RealMatrix lap = build_laplacian(chain(L), 1.0);
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(lap);
    std::vector<double> oracle;
    for (int k = 0; k < n; ++k) oracle.push_back(2.0 - 2.0 * std::cos(k * std::numbers::pi / n));
    std::sort(oracle.begin(), oracle.end());
    for (int k = 0; k < n; ++k) EXPECT_NEAR(es.eigenvalues()(k), oracle[k], 1e-12);
  }
}

TEST(Laplacian, PeriodicRowSumsVanish) {
  for (int d : {1, 2}) {
    LatticeConfig c = chain(2, Boundary::Periodic);
    c.d = d;
    RealMatrix lap = build_laplacian(c, 1.0);
    EXPECT_LE(lap.rowwise().sum().cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_DOUBLE_EQ(lap(0, 0), 2.0 * d);
  }
}

TEST(Anderson, ZeroCouplingIsLaplacian) {
  auto c = chain(3);
  auto r = make_disorder(c, 42, 0.0);
  EXPECT_EQ(build_anderson(c, r), build_laplacian(c, 1.0));
}

TEST(Anderson, ConstantPotential) {
  auto c = chain(2);
  DisorderRealization r;
  r.lambda = 1.0;
  r.potential.assign(c.n_sites(), 1.0);
  RealMatrix want = build_laplacian(c, 1.0) + RealMatrix::Identity(5, 5);
  EXPECT_EQ(build_anderson(c, r), want);
}

TEST(Anderson, SeedsChangeOnlyTheDiagonal) {
  auto c = chain(4);
  RealMatrix a = build_anderson(c, make_disorder(c, 1, 0.7));
  RealMatrix b = build_anderson(c, make_disorder(c, 2, 0.7));
  RealMatrix diff = a - b;
  EXPECT_GT(diff.diagonal().cwiseAbs().maxCoeff(), 0.0);
  diff.diagonal().setZero();
  EXPECT_EQ(diff.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Anderson, PotentialInRangeAndOrderFree) {
  LatticeConfig c;
  c.d = 2;
  c.L = 3;
  auto r = make_disorder(c, 77, 1.0);
  for (double v : r.potential) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  // value at a site depends only on (seed, site)
  EXPECT_EQ(r.potential[5], uniform_pm1(77, 5));
  EXPECT_EQ(make_disorder(c, 77, 1.0).potential, r.potential);
}

TEST(Anderson, SelfDualModelIsReproducible) {
  AndersonParams p;
  p.lattice = chain(5);
  p.lambda = 0.4;
  p.pairing = 0.3;
  p.seed = 9;
  EXPECT_EQ(build_anderson_self_dual(p).matrix(), build_anderson_self_dual(p).matrix());
  p.lattice.spins = 2;
  auto h = build_anderson_self_dual(p);
  EXPECT_LE(h.meta().self_dual_residual, 1e-10 * op_norm(h.matrix()));
}

TEST(Embed, DiagonalHand) {
  auto sp = std::make_shared<const SelfDualSpace>(make_mode_space(2));
  QuadraticModel m;
  m.h = Matrix::Zero(2, 2);
  m.h.diagonal() << 0.8, -0.8;
  auto H = embed_quadratic(m, sp);
  // modes interleaved: (1-, 1+, 2-, 2+)
  Matrix want = Matrix::Zero(4, 4);
  want.diagonal() << 0.4, -0.4, -0.4, 0.4;
  EXPECT_LE(op_norm(H.matrix() - want), 1e-15);
}

TEST(Embed, NoPairingSpectrumIsHalfOfH) {
  auto sp = std::make_shared<const SelfDualSpace>(make_mode_space(4));
  QuadraticModel m;
  Matrix a = detail::gaussian_matrix(4, 2);
  m.h = a + a.adjoint();
  auto H = embed_quadratic(m, sp);
  Eigen::SelfAdjointEigenSolver<Matrix> eh(m.h, Eigen::EigenvaluesOnly);
  std::vector<double> oracle;
  for (int i = 0; i < 4; ++i) {
    oracle.push_back(0.5 * eh.eigenvalues()(i));
    oracle.push_back(-0.5 * eh.eigenvalues()(i));
  }
  std::sort(oracle.begin(), oracle.end());
  RealVector got = sorted_eigs(H.matrix());
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(got(i), oracle[i], 1e-12);
  // positive band recovers h: 2 P H P = h on the minus labels
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(2.0 * H.matrix()(2 * i, 2 * j) - m.h(i, j)), 0.0, 1e-15);
}

TEST(Embed, ZeroAndShapeErrors) {
  auto sp = std::make_shared<const SelfDualSpace>(make_mode_space(2));
  QuadraticModel m{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  EXPECT_EQ(embed_quadratic(m, sp).matrix(), Matrix::Zero(4, 4));
  m.h = Matrix::Zero(3, 3);
  try {
    embed_quadratic(m, sp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  m.h = Matrix::Zero(2, 2);
  m.g = Matrix::Ones(2, 2);
  EXPECT_THROW(embed_quadratic(m, sp), Error);
}

TEST(Kitaev, PeriodicSpectrumMatchesDispersion) {
  // ring of n sites: k = 2 pi m / n, H eigenvalues are +-E(k)/2
  for (double mu : {0.0, 0.7, -1.3, 2.5}) {
    const int n = 10;
    const double t = 1.0, delta = 0.6;
    auto H = build_kitaev_chain(n, t, mu, delta, Boundary::Periodic);
    std::vector<double> oracle;
    for (int m = 0; m < n; ++m) {
      const double e = kitaev_dispersion(2 * std::numbers::pi * m / n, t, mu, delta);
      oracle.push_back(0.5 * e);
      oracle.push_back(-0.5 * e);
    }
    std::sort(oracle.begin(), oracle.end());
    RealVector got = sorted_eigs(H.matrix());
    for (int i = 0; i < 2 * n; ++i) EXPECT_NEAR(got(i), oracle[i], 1e-12) << "mu=" << mu;
  }
}

TEST(Kitaev, SweetSpotOpenChainHasTwoZeroModes) {
  auto H = build_kitaev_chain(8, 1.0, 0.0, 1.0, Boundary::Open);
  RealVector l = sorted_eigs(H.matrix());
  int zeros = 0;
  for (int i = 0; i < l.size(); ++i) {
    if (std::abs(l(i)) < 1e-12) {
      ++zeros;
    } else {
      EXPECT_NEAR(std::abs(l(i)), 1.0, 1e-12);
    }
  }
  EXPECT_EQ(zeros, 2);
}

TEST(Kitaev, EdgeModesDecayWithLength) {
  // away from the sweet spot the edge pair splits, exponentially in the length
  double prev = 1.0;
  for (int n : {4, 8, 16}) {
    auto r = resolve(build_kitaev_chain(n, 1.0, 0.5, 1.0, Boundary::Open), 0.0);
    EXPECT_LT(r.min_abs_eigenvalue, prev);
    prev = r.min_abs_eigenvalue;
  }
  EXPECT_LT(prev, 1e-3);
  // the bulk gap stays near the dispersion minimum
  auto r = resolve(build_kitaev_chain(40, 1.0, 0.5, 0.6, Boundary::Open), 0.0);
  std::vector<double> a(r.eigenvalues.data(), r.eigenvalues.data() + r.dim());
  for (auto& v : a) v = std::abs(v);
  std::sort(a.begin(), a.end());
  double bulk_min = 1e9;
  for (int m = 0; m < 4000; ++m)
    bulk_min = std::min(bulk_min, 0.5 * kitaev_dispersion(std::numbers::pi * m / 4000, 1.0, 0.5, 0.6));
  EXPECT_GT(a[2], bulk_min - 0.05);
}

TEST(Kitaev, LargeMuIsGapped) {
  auto r = resolve(build_kitaev_chain(12, 1.0, 10.0, 1.0, Boundary::Open));
  EXPECT_FALSE(gap_closed(r));
  EXPECT_GT(r.gap, 3.5);  // |mu| - 2t halved
}

TEST(Kitaev, AtomicLimit) {
  auto H = build_kitaev_chain(5, 0.0, 1.0, 0.0, Boundary::Open);
  Matrix off = H.matrix();
  off.diagonal().setZero();
  EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(resolve(H).gap, 0.5);
}

TEST(Kitaev, GapVanishesOnlyAtPhaseBoundary) {
  // ring with n even: gap(mu) = min_k E(k)/2 over allowed k, zero only at |mu| = 2t
  const int n = 12;
  double prev = -1;
  for (int i = 0; i <= 80; ++i) {
    const double mu = -4.0 + 0.1 * i;
    const double g = resolve(build_kitaev_chain(n, 1.0, mu, 1.0, Boundary::Periodic), 0.0).min_abs_eigenvalue;
    double oracle = 1e9;
    for (int m = 0; m < n; ++m)
      oracle = std::min(oracle, 0.5 * kitaev_dispersion(2 * std::numbers::pi * m / n, 1.0, mu, 1.0));
    EXPECT_NEAR(g, oracle, 1e-12);
    if (std::abs(std::abs(mu) - 2.0) > 1e-9) EXPECT_GT(g, 1e-3) << mu;
    if (prev >= 0) EXPECT_LT(std::abs(g - prev), 0.1 + 1e-12);  // Lipschitz in mu with constant 1/2
    prev = g;
  }
}

TEST(Restrict, FullBoxIsUnchanged) {
  AndersonParams p;
  p.lattice = chain(3);
  p.lambda = 0.5;
  p.pairing = 0.2;
  auto H = build_anderson_self_dual(p);
  auto r = restrict_finite_volume(H, 3);
  EXPECT_EQ(r.inner.matrix(), H.matrix());
  EXPECT_EQ(r.boundary_term.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(restrict_finite_volume(H, 4), Error);
}

TEST(Restrict, DiagonalHasNoBoundary) {
  AndersonParams p;
  p.lattice = chain(4);
  p.hopping_scale = 0.0;
  p.lambda = 1.0;
  auto H = build_anderson_self_dual(p);
  for (int L1 = 0; L1 < 4; ++L1) EXPECT_EQ(restrict_finite_volume(H, L1).boundary_term.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Restrict, BoundarySupportAndReassembly) {
  AndersonParams p;
  p.lattice.d = 2;
  p.lattice.L = 3;
  p.lambda = 0.3;
  p.pairing = 0.4;
  auto H = build_anderson_self_dual(p);
  auto r = restrict_finite_volume(H, 2);
  const auto& sp = H.space();
  auto inf_norm = [](const std::vector<int>& x) {
    int m = 0;
    for (int v : x) m = std::max(m, std::abs(v));
    return m;
  };
  for (int i = 0; i < sp.dim(); ++i)
    for (int j = 0; j < sp.dim(); ++j) {
      if (r.boundary_term(i, j) == Complex(0.0)) continue;
      // nearest neighbours across the inner box edge
      const int ni = inf_norm(sp.labels()[i].x), nj = inf_norm(sp.labels()[j].x);
      EXPECT_TRUE((ni == 2 && nj == 3) || (ni == 3 && nj == 2));
      EXPECT_LE(sp.distance(i, j), 1.0);
    }
  // P H P + boundary + outer block = H
  Matrix inner_big = Matrix::Zero(sp.dim(), sp.dim());
  for (std::size_t a = 0; a < r.kept.size(); ++a)
    for (std::size_t b = 0; b < r.kept.size(); ++b) inner_big(r.kept[a], r.kept[b]) = r.inner.matrix()(a, b);
  EXPECT_EQ(inner_big + r.boundary_term + r.outer_block, H.matrix());
  EXPECT_LE(op_norm(r.boundary_term + sp.conjugate(r.boundary_term)), 1e-14);
  EXPECT_EQ(r.inner.space().dim(), 2 * 25);
}
