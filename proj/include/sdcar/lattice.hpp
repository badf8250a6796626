#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sdcar/self_dual.hpp"

namespace sdcar {

enum class Boundary { Open, Periodic };

inline const char* to_string(Boundary b) { return b == Boundary::Open ? "open" : "periodic"; }

struct LatticeConfig {
  int d = 1;
  int L = 0;
  int spins = 1;
  Boundary boundary = Boundary::Open;
  double epsilon = 1.0;

  void validate() const {
    if (d < 1) throw Error(ErrorKind::InvalidArgument, "d must be >= 1");
    if (L < 0) throw Error(ErrorKind::InvalidArgument, "L must be >= 0");
    if (spins < 1) throw Error(ErrorKind::InvalidArgument, "spin set must be nonempty");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0,1]");
  }
  int side() const { return 2 * L + 1; }
  int n_sites() const {
    int n = 1;
    for (int k = 0; k < d; ++k) n *= side();
    return n;
  }
};

/// Sites of the box {-L..L}^d in lexicographic order.
inline std::vector<std::vector<int>> box_sites(const LatticeConfig& c) {
  std::vector<std::vector<int>> out;
  std::vector<int> x(c.d, -c.L);
  for (int n = 0; n < c.n_sites(); ++n) {
    out.push_back(x);
    for (int k = c.d - 1; k >= 0; --k) {
      if (++x[k] <= c.L) break;
      x[k] = -c.L;
    }
  }
  return out;
}

inline SelfDualSpace space_from_sites(const std::vector<std::vector<int>>& sites, int spins,
                                      std::vector<int> periods) {
  std::vector<SiteLabel> labels;
  labels.reserve(sites.size() * spins * 2);
  for (const auto& x : sites)
    for (int s = 0; s < spins; ++s) {
      labels.push_back({x, s, Tag::Minus});
      labels.push_back({x, s, Tag::Plus});
    }
  return make_space(std::move(labels), std::move(periods));
}

inline SelfDualSpace build_box_space(const LatticeConfig& c) {
  c.validate();
  std::vector<int> periods(c.d, c.boundary == Boundary::Periodic ? c.side() : 0);
  return space_from_sites(box_sites(c), c.spins, std::move(periods));
}

/// Chain with sites 0..n-1; the Kitaev builders live on this geometry.
inline SelfDualSpace build_chain_space(int n_sites, Boundary b) {
  std::vector<std::vector<int>> sites;
  for (int j = 0; j < n_sites; ++j) sites.push_back({j});
  return space_from_sites(sites, 1, {b == Boundary::Periodic ? n_sites : 0});
}

/// Nearest-neighbour pairs (i, j) with j = i + e_k, indices into box_sites.
inline std::vector<std::pair<int, int>> box_bonds(const LatticeConfig& c) {
  const int side = c.side();
  std::set<std::pair<int, int>> bonds;
  const int n = c.n_sites();
  for (int i = 0; i < n; ++i) {
    // decode lexicographic index
    std::vector<int> coord(c.d);
    int r = i;
    for (int k = c.d - 1; k >= 0; --k) {
      coord[k] = r % side;
      r /= side;
    }
    int stride = 1;
    for (int k = c.d - 1; k >= 0; --k) {
      int next = coord[k] + 1;
      bool ok = next < side;
      if (!ok && c.boundary == Boundary::Periodic) {
        next = 0;
        ok = true;
      }
      if (ok) {
        int j = i + (next - coord[k]) * stride;
        if (j != i) bonds.insert({i, j});
      }
      stride *= side;
    }
  }
  return {bonds.begin(), bonds.end()};
}

/// Graph Laplacian on one spin component: deg(v) psi(v) - s * sum over neighbours.
inline RealMatrix build_laplacian(const LatticeConfig& c, double hopping_scale) {
  c.validate();
  if (hopping_scale < 0.0 || hopping_scale > 1.0) {
    throw Error(ErrorKind::InvalidArgument, "hopping scale must lie in [0,1]", hopping_scale);
  }
  const int n = c.n_sites();
  RealMatrix lap = RealMatrix::Zero(n, n);
  std::vector<std::set<int>> nbr(n);
  for (auto [i, j] : box_bonds(c)) {
    nbr[i].insert(j);
    nbr[j].insert(i);
  }
  for (int i = 0; i < n; ++i) {
    lap(i, i) = static_cast<double>(nbr[i].size());
    for (int j : nbr[i]) lap(i, j) -= hopping_scale;
  }
  return lap;
}

/// Counter-based generator: the value at (seed, site) does not depend on
/// the order in which sites are visited.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform_pm1(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0,1)
  return 2.0 * u - 1.0;
}

/// Child seed for realization `index` of an ensemble.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

struct DisorderRealization {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::vector<double> potential;
};

inline DisorderRealization make_disorder(const LatticeConfig& c, std::uint64_t seed, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0", lambda);
  DisorderRealization r;
  r.seed = seed;
  r.lambda = lambda;
  r.potential.resize(c.n_sites());
  for (int i = 0; i < c.n_sites(); ++i) r.potential[i] = uniform_pm1(seed, static_cast<std::uint64_t>(i));
  return r;
}

/// h = Laplacian + lambda V on one spin component.
inline RealMatrix build_anderson(const LatticeConfig& c, const DisorderRealization& r, double hopping_scale = 1.0) {
  RealMatrix h = build_laplacian(c, hopping_scale);
  if (static_cast<int>(r.potential.size()) != c.n_sites()) {
    throw Error(ErrorKind::ShapeMismatch, "potential does not match the box");
  }
  for (int i = 0; i < c.n_sites(); ++i) h(i, i) += r.lambda * r.potential[i];
  return h;
}

/// Quadratic data on the mode space: h Hermitian, g antisymmetric (g^T = -g).
struct QuadraticModel {
  Matrix h;
  Matrix g;
};

/// kappa(h) + kappa~(g). In the (-,+) block picture this is
///   1/2 [[h, g], [-conj(g), -conj(h)]]
/// interleaved so that mode j occupies labels 2j, 2j+1.
inline SelfDualHamiltonian embed_quadratic(const QuadraticModel& m, std::shared_ptr<const SelfDualSpace> space,
                                           HamiltonianMeta meta = {}) {
  const int n = space->modes();
  if (m.h.rows() != n || m.h.cols() != n) throw Error(ErrorKind::ShapeMismatch, "h does not match the mode count");
  Matrix g = m.g.size() == 0 ? Matrix::Zero(n, n) : m.g;
  if (g.rows() != n || g.cols() != n) throw Error(ErrorKind::ShapeMismatch, "g does not match the mode count");
  const double hs = std::max(op_norm(m.h), 1.0);
  if (op_norm(m.h - m.h.adjoint()) > 1e-12 * hs) throw Error(ErrorKind::NotHermitian, "h is not Hermitian");
  const double gs = std::max(op_norm(g), 1.0);
  if (op_norm(g + g.transpose()) > 1e-12 * gs) throw Error(ErrorKind::NotSkew, "pairing is not antisymmetric");
  Matrix H = Matrix::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      H(2 * i, 2 * j) = 0.5 * m.h(i, j);
      H(2 * i + 1, 2 * j + 1) = -0.5 * std::conj(m.h(i, j));
      H(2 * i, 2 * j + 1) = 0.5 * g(i, j);
      H(2 * i + 1, 2 * j) = -0.5 * std::conj(g(i, j));
    }
  return validate_self_dual(std::move(space), std::move(H), std::move(meta));
}

/// h = -t hop - mu, pairing g(j+1, j) = delta. Spectrum of H is
/// +-E(k)/2 with E(k) = sqrt((2t cos k + mu)^2 + 4 delta^2 sin^2 k) on the ring.
inline QuadraticModel kitaev_model(int n_sites, double t, double mu, double delta, Boundary b) {
  QuadraticModel m;
  m.h = Matrix::Zero(n_sites, n_sites);
  m.g = Matrix::Zero(n_sites, n_sites);
  for (int j = 0; j < n_sites; ++j) m.h(j, j) = -mu;
  const int bonds = b == Boundary::Periodic ? n_sites : n_sites - 1;
  for (int j = 0; j < bonds; ++j) {
    const int k = (j + 1) % n_sites;
    m.h(j, k) += -t;
    m.h(k, j) += -t;
    m.g(k, j) += delta;
    m.g(j, k) -= delta;
  }
  return m;
}

inline SelfDualHamiltonian build_kitaev_chain(int n_sites, double t, double mu, double delta, Boundary b) {
  if (n_sites < 2) throw Error(ErrorKind::InvalidArgument, "Kitaev chain needs at least 2 sites");
  if (b == Boundary::Periodic && n_sites < 3) {
    throw Error(ErrorKind::InvalidArgument, "periodic Kitaev chain needs at least 3 sites");
  }
  auto space = std::make_shared<const SelfDualSpace>(build_chain_space(n_sites, b));
  HamiltonianMeta meta;
  meta.model = "kitaev";
  return embed_quadratic(kitaev_model(n_sites, t, mu, delta, b), std::move(space), meta);
}

/// Closed-chain dispersion of the BdG energy.
inline double kitaev_dispersion(double k, double t, double mu, double delta) {
  const double a = 2.0 * t * std::cos(k) + mu;
  const double b = 2.0 * delta * std::sin(k);
  return std::sqrt(a * a + b * b);
}

struct AndersonParams {
  LatticeConfig lattice;
  double hopping_scale = 1.0;
  double lambda = 0.0;
  double mu = -1.0;     // chemical potential subtracted from h
  double pairing = 0.0; // nearest-neighbour pairing amplitude, same spin
  std::uint64_t seed = 0;
};

/// Self-dual Anderson model: embed(Laplacian + lambda V - mu, pairing on bonds), spin-diagonal.
inline SelfDualHamiltonian build_anderson_self_dual(const AndersonParams& p) {
  const auto& c = p.lattice;
  const auto r = make_disorder(c, p.seed, p.lambda);
  const RealMatrix h1 = build_anderson(c, r, p.hopping_scale);
  const int ns = c.n_sites();
  const int n = ns * c.spins;
  QuadraticModel m;
  m.h = Matrix::Zero(n, n);
  m.g = Matrix::Zero(n, n);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j)
      for (int s = 0; s < c.spins; ++s) m.h(i * c.spins + s, j * c.spins + s) = h1(i, j);
  for (int i = 0; i < n; ++i) m.h(i, i) -= p.mu;
  if (p.pairing != 0.0) {
    for (auto [i, j] : box_bonds(c))
      for (int s = 0; s < c.spins; ++s) {
        m.g(j * c.spins + s, i * c.spins + s) += p.pairing;
        m.g(i * c.spins + s, j * c.spins + s) -= p.pairing;
      }
  }
  auto space = std::make_shared<const SelfDualSpace>(build_box_space(c));
  HamiltonianMeta meta;
  meta.model = "anderson";
  meta.seed = p.seed;
  return embed_quadratic(m, std::move(space), meta);
}

struct Restriction {
  SelfDualHamiltonian inner;   // H restricted and reindexed to the small space
  Matrix boundary_term;        // P H P^c + P^c H P on the big space
  Matrix outer_block;          // P^c H P^c on the big space
  Matrix projector;            // P on the big space
  std::vector<int> kept;       // indices of the big space kept, in order
};

/// Restrict to the labels whose site satisfies `keep`.
inline Restriction restrict_to(const SelfDualHamiltonian& big, const std::function<bool(const std::vector<int>&)>& keep) {
  const auto& sp = big.space();
  std::vector<int> kept;
  std::vector<SiteLabel> labels;
  for (int i = 0; i < sp.dim(); ++i)
    if (keep(sp.labels()[i].x)) {
      kept.push_back(i);
      labels.push_back(sp.labels()[i]);
    }
  if (kept.empty()) throw Error(ErrorKind::BoxMismatch, "restriction region is empty");
  // the small box is open even when the big one is periodic
  std::vector<int> periods(sp.periods().size(), 0);
  auto small = std::make_shared<const SelfDualSpace>(make_space(labels, periods));
  const int n = sp.dim();
  Matrix p = Matrix::Zero(n, n);
  for (int i : kept) p(i, i) = 1.0;
  const Matrix pc = Matrix::Identity(n, n) - p;
  const Matrix& H = big.matrix();
  Matrix inner(kept.size(), kept.size());
  for (std::size_t a = 0; a < kept.size(); ++a)
    for (std::size_t b = 0; b < kept.size(); ++b) inner(a, b) = H(kept[a], kept[b]);
  HamiltonianMeta meta = big.meta();
  return Restriction{validate_self_dual(small, std::move(inner), meta), p * H * pc + pc * H * p, pc * H * pc, p,
                     std::move(kept)};
}

/// Restriction from a box of radius L2 to the sub-box of radius L1.
inline Restriction restrict_finite_volume(const SelfDualHamiltonian& big, int L1) {
  int L2 = 0;
  for (const auto& l : big.space().labels())
    for (int v : l.x) L2 = std::max(L2, std::abs(v));
  if (L1 < 0 || L1 > L2) throw Error(ErrorKind::BoxMismatch, "L1 must satisfy 0 <= L1 <= L2", L1);
  return restrict_to(big, [L1](const std::vector<int>& x) {
    for (int v : x)
      if (std::abs(v) > L1) return false;
    return true;
  });
}

}  // namespace sdcar
