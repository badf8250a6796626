#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include "sdcar/experiments/config.hpp"
#include "sdcar/flow.hpp"
#include "sdcar/fock.hpp"
#include "sdcar/lattice.hpp"
#include "sdcar/pfaffian.hpp"
#include "sdcar/quasi_free.hpp"
#include "sdcar/spectral.hpp"
#include "sdcar/z2index.hpp"

namespace sdcar::experiments {

/// Records of one experiment, in output order. Failures are assertion
/// failures (exit code 2); thrown Errors are errors (exit code 1).
struct RunResult {
  std::string command;
  std::string row_type;  // record type exported to CSV
  std::vector<Json> records;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
  void fail(const std::string& m) { failures.push_back(m); }
};

// ---------------------------------------------------------------- model setup

struct ModelPath {
  HamiltonianPath path;
  std::function<Matrix(double)> at_param;  // empty for custom matrices
};

inline std::uint64_t single_run_seed(const ExperimentConfig& c) {
  return c.model.seed ? *c.model.seed : derive_seed(c.master_seed, 0);
}

inline AndersonParams anderson_params(const ExperimentConfig& c, std::uint64_t seed) {
  AndersonParams p;
  p.lattice = c.model.lattice;
  p.lattice.boundary = c.model.boundary;
  p.hopping_scale = c.model.hopping_scale;
  p.lambda = c.model.lambda;
  p.mu = c.model.mu;
  p.pairing = c.model.pairing;
  p.seed = seed;
  return p;
}

inline void set_anderson_param(AndersonParams& p, const std::string& name, double v) {
  if (name == "lambda") p.lambda = v;
  else if (name == "mu") p.mu = v;
  else if (name == "pairing") p.pairing = v;
  else if (name == "hopping_scale") p.hopping_scale = v;
  else throw Error(ErrorKind::InvalidArgument, "unknown anderson parameter " + name);
}

/// Custom endpoints, checked for shape and self-duality before anything runs.
inline std::pair<SelfDualHamiltonian, SelfDualHamiltonian> load_custom(const ExperimentConfig& c) {
  Matrix a = read_matrix_file(c.model.h0_file);
  Matrix b = read_matrix_file(c.model.h1_file);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "endpoint dimension mismatch: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
  }
  if (a.rows() != a.cols()) throw Error(ErrorKind::ShapeMismatch, "endpoint matrices must be square");
  if (a.rows() % 2) throw Error(ErrorKind::OddDimension, "endpoint dimension is odd", a.rows());
  auto space = std::make_shared<const SelfDualSpace>(make_mode_space(static_cast<int>(a.rows() / 2)));
  auto h0 = validate_self_dual(space, std::move(a));
  auto h1 = validate_self_dual(space, std::move(b));
  return {h0, h1};
}

inline ModelPath build_model_path(const ExperimentConfig& c, std::uint64_t seed) {
  ModelPath mp;
  const auto& m = c.model;
  switch (m.kind) {
    case ModelKind::Kitaev: {
      const auto param = c.path.param;
      auto model = [m, param](double v) {
        double t = m.t, mu = m.mu, delta = m.delta;
        if (param == "t") t = v;
        else if (param == "mu") mu = v;
        else if (param == "delta") delta = v;
        else throw Error(ErrorKind::InvalidArgument, "unknown kitaev parameter " + param);
        return build_kitaev_chain(m.n_sites, t, mu, delta, m.boundary).matrix();
      };
      auto space = build_kitaev_chain(m.n_sites, m.t, m.mu, m.delta, m.boundary).space_ptr();
      mp.at_param = model;
      mp.path = parameter_path(space, model, c.path.knots);
      break;
    }
    case ModelKind::Anderson: {
      const auto base = anderson_params(c, seed);
      const auto param = c.path.param;
      auto model = [base, param](double v) {
        auto p = base;
        set_anderson_param(p, param, v);
        return build_anderson_self_dual(p).matrix();
      };
      auto space = build_anderson_self_dual(base).space_ptr();
      mp.at_param = model;
      mp.path = parameter_path(space, model, c.path.knots);
      break;
    }
    case ModelKind::Custom: {
      auto [h0, h1] = load_custom(c);
      mp.path = linear_path(h0.space_ptr(), h0.matrix(), h1.matrix());
      break;
    }
  }
  return mp;
}

/// The same path cut down to the label indices `kept`.
inline HamiltonianPath restrict_path(const HamiltonianPath& big, std::shared_ptr<const SelfDualSpace> small,
                                     const std::vector<int>& kept) {
  HamiltonianPath p;
  p.space = std::move(small);
  auto at = big.at;
  auto dat = big.derivative_at;
  p.at = [at, kept](double s) -> Matrix { return at(s)(kept, kept); };
  p.derivative_at = [dat, kept](double s) -> Matrix { return dat(s)(kept, kept); };
  return p;
}

inline StepControl step_control(const ExperimentConfig& c) {
  StepControl ctl;
  ctl.h_init = c.tol.h_init;
  ctl.h_min = c.tol.h_min;
  ctl.transport_tol = c.tol.transport;
  return ctl;
}

inline FlowMode flow_mode(const ExperimentConfig& c) { return c.flow_mode == "filter" ? FlowMode::Filter : FlowMode::Kato; }

inline SpectralResolution resolve_rel(const ExperimentConfig& c, const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const double scale = es.eigenvalues().size() ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  return resolve(h, c.tol.zero_tol * scale);
}

inline double min_abs_eigenvalue(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

/// Run f(0..n-1) on up to hardware_concurrency threads; results stay in index order.
template <class F>
auto parallel_map(int n, F f) -> std::vector<decltype(f(0))> {
  using R = decltype(f(0));
  std::vector<R> out;
  out.reserve(n);
  const int width = std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < n; start += width) {
    std::vector<std::future<R>> batch;
    for (int i = start; i < std::min(n, start + width); ++i) batch.push_back(std::async(std::launch::async, f, i));
    for (auto& fut : batch) out.push_back(fut.get());
  }
  return out;
}

// ---------------------------------------------------------------- gap scan

struct ScanPoint {
  double s = 0.0;
  double gap = 0.0;  // min |eigenvalue|
  int parity = 1;    // sign of the Pfaffian of the Majorana form
};

/// 10x finer than the sweep grid.
inline std::vector<ScanPoint> fine_scan(const HamiltonianPath& path, int grid) {
  const int n = (grid - 1) * 10 + 1;
  std::vector<ScanPoint> out(n);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    const Matrix h = path.at(s);
    out[i] = {s, min_abs_eigenvalue(h), pfaffian_parity(*path.space, h)};
  }
  return out;
}

struct GapClosing {
  double s_tilde = 0.0;
  double gap = 0.0;
  double lo = 0.0, hi = 0.0;        // final bisection bracket
  int crossings = 0;                // parity sign changes on the fine grid
  std::vector<std::pair<double, double>> brackets;
  std::vector<std::pair<double, double>> accidental;  // (s, gap) closings without a sign change
  bool accidental_only = false;
  int min_index = 0;                // fine-grid index of the smallest gap
};

inline double golden_min(const std::function<double(double)>& f, double a, double b, double tol, double* at) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  *at = 0.5 * (a + b);
  return f(*at);
}

/// Pre-scan, then bisection of the first parity change. Closings where the
/// gap dips to the threshold without a sign change are recorded as accidental.
inline GapClosing locate_gap_closing(const HamiltonianPath& path, const ExperimentConfig& c,
                                     const std::vector<ScanPoint>& scan) {
  GapClosing g;
  const int n = static_cast<int>(scan.size());
  std::vector<bool> near_change(n, false);
  // the Pfaffian sign is noise where the gap is closed, so compare only reliable points
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    if (scan[i].gap <= c.tol.gap_closed) continue;
    if (prev >= 0 && scan[i].parity != scan[prev].parity) {
      ++g.crossings;
      g.brackets.emplace_back(scan[prev].s, scan[i].s);
      for (int k = prev; k <= i; ++k) near_change[k] = true;
    }
    prev = i;
  }
  for (int i = 0; i < n; ++i)
    if (scan[i].gap < scan[g.min_index].gap) g.min_index = i;
  auto gap_at = [&](double s) { return min_abs_eigenvalue(path.at(s)); };
  for (int i = 0; i < n; ++i) {
    if (near_change[i]) continue;
    const bool left = i == 0 || scan[i].gap <= scan[i - 1].gap;
    const bool right = i == n - 1 || scan[i].gap <= scan[i + 1].gap;
    if (!left || !right) continue;
    double at = scan[i].s, v = scan[i].gap;
    if (i > 0 && i < n - 1) v = golden_min(gap_at, scan[i - 1].s, scan[i + 1].s, c.tol.bisect, &at);
    if (v <= c.tol.gap_closed) g.accidental.emplace_back(at, v);
  }
  if (g.crossings > 0) {
    double a = g.brackets.front().first, b = g.brackets.front().second;
    const int pa = pfaffian_parity(*path.space, path.at(a));
    while (b - a > c.tol.bisect) {
      const double mid = 0.5 * (a + b);
      if (pfaffian_parity(*path.space, path.at(mid)) == pa) a = mid;
      else b = mid;
    }
    g.lo = a;
    g.hi = b;
    g.s_tilde = 0.5 * (a + b);
    g.gap = gap_at(g.s_tilde);
    return g;
  }
  if (g.accidental.empty()) {
    throw Error(ErrorKind::NoSignChange, "no parity change and no gap dip below " + std::to_string(c.tol.gap_closed) +
                                             " (same phase)",
                scan[g.min_index].gap);
  }
  g.accidental_only = true;
  g.s_tilde = g.accidental.front().first;
  g.gap = g.accidental.front().second;
  g.lo = g.hi = g.s_tilde;
  return g;
}

inline bool scan_has_closing(const std::vector<ScanPoint>& scan, double threshold) {
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (scan[i].gap <= threshold) return true;
    if (i > 0 && scan[i].parity != scan[i - 1].parity) return true;
  }
  return false;
}

inline Json gap_closing_record(const GapClosing& g) {
  Json acc = Json::array();
  for (auto [s, v] : g.accidental) acc.push_back({{"s", s}, {"gap", v}});
  Json br = Json::array();
  for (auto [a, b] : g.brackets) br.push_back(Json::array({a, b}));
  return Json{{"type", "gap_closing"},
              {"s_tilde", g.s_tilde},
              {"gap", g.gap},
              {"bracket", Json::array({g.lo, g.hi})},
              {"kind", g.accidental_only ? "accidental" : "sign_change"},
              {"crossings", g.crossings},
              {"sign_change_brackets", br},
              {"accidental", acc}};
}

/// Endpoint sigma when both ends are gapped, else 0.
inline int endpoint_sigma(const ExperimentConfig& c, const HamiltonianPath& path) {
  const auto r0 = resolve_rel(c, path.at(0.0));
  const auto r1 = resolve_rel(c, path.at(1.0));
  if (!r0.gapped() || !r1.gapped()) return 0;
  return z2_index(*path.space, r0.E_plus, r1.E_plus).sigma;
}

// ---------------------------------------------------------------- gapfind

inline RunResult find_gap_closing(const ExperimentConfig& c, GapClosing* out = nullptr) {
  RunResult res{"gapfind", "gap_closing", {}, {}, {}};
  const auto mp = build_model_path(c, single_run_seed(c));
  const int sig = endpoint_sigma(c, mp.path);
  res.records.push_back({{"type", "endpoints"}, {"sigma", sig == 0 ? Json(nullptr) : Json(sig)}});
  const auto scan = fine_scan(mp.path, c.path.grid);
  const auto g = locate_gap_closing(mp.path, c, scan);
  if (g.crossings > 1) {
    res.warnings.push_back(std::to_string(g.crossings) + " crossings on the path; analysing the first at s = " +
                           std::to_string(g.s_tilde));
  }
  if (sig == -1 && g.crossings == 0) res.fail("endpoints differ in sigma but no parity change was found");
  if (g.gap > c.tol.gap_closed) {
    res.fail("gap at s_tilde is " + std::to_string(g.gap) + " > " + std::to_string(c.tol.gap_closed));
  }
  res.records.push_back(gap_closing_record(g));
  if (out) *out = g;
  return res;
}

// ---------------------------------------------------------------- sweep

inline RunResult run_sweep(const ExperimentConfig& c) {
  RunResult res{"sweep", "point", {}, {}, {}};
  const auto mp = build_model_path(c, single_run_seed(c));
  const auto& path = mp.path;
  const auto grid = uniform_grid(c.path.grid);
  const auto scan = fine_scan(path, c.path.grid);
  const bool closing = scan_has_closing(scan, c.tol.gap_closed);

  const auto r0 = resolve_rel(c, path.at(0.0));
  std::vector<Json> points;
  double min_gap = std::numeric_limits<double>::infinity();
  for (double s : grid) {
    const auto r = resolve_rel(c, path.at(s));
    Json p{{"type", "point"}, {"s", s}, {"gap", r.min_abs_eigenvalue}};
    p["parity"] = pfaffian_parity(*path.space, path.at(s));
    if (r0.gapped() && r.gapped()) {
      const auto ix = z2_index(*path.space, r0.E_plus, r.E_plus);
      p["sigma"] = ix.sigma;
    } else {
      p["sigma"] = nullptr;
    }
    min_gap = std::min(min_gap, r.min_abs_eigenvalue);
    points.push_back(std::move(p));
  }
  double scan_min = std::numeric_limits<double>::infinity();
  for (const auto& q : scan) scan_min = std::min(scan_min, q.gap);

  Json summary{{"type", "summary"}, {"grid_min_gap", min_gap}, {"scan_min_gap", scan_min}, {"gap_closing", closing}};
  if (closing) {
    // no flow through a closing; hand over to the gap finder
    try {
      const auto g = locate_gap_closing(path, c, scan);
      summary["gap_closing_at"] = g.s_tilde;
      if (g.crossings > 1) res.warnings.push_back(std::to_string(g.crossings) + " crossings on the path");
      for (auto& p : points) res.records.push_back(std::move(p));
      res.records.push_back(gap_closing_record(g));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoSignChange) throw;
      for (auto& p : points) res.records.push_back(std::move(p));
    }
    res.records.push_back(summary);
    return res;
  }
  FilterProfile profile;
  const auto flow = integrate_flow(path, grid, profile, flow_mode(c), step_control(c));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& fp = flow.points[i];
    auto& p = points[i];
    p["transport_error"] = fp.transport_error;
    p["det_re"] = fp.det.real();
    p["det_im"] = fp.det.imag();
    p["gamma_residual"] = fp.gamma_residual;
    p["deficit"] = fp.deficit;
    if (p["sigma"] != 1) res.fail("sigma != +1 at s = " + std::to_string(fp.s));
    if (std::abs(fp.det - Complex(1.0)) > c.tol.det) res.fail("det V != 1 at s = " + std::to_string(fp.s));
    res.records.push_back(std::move(p));
  }
  if (flow.transport_error > c.tol.transport) {
    res.fail("transport error " + std::to_string(flow.transport_error) + " above " + std::to_string(c.tol.transport));
  }
  if (flow.step_floor_reached) res.warnings.push_back("flow step reached h_min");
  summary["transport_error"] = flow.transport_error;
  summary["max_det_deviation"] = flow.max_det_deviation;
  summary["gamma_residual"] = flow.gamma_residual;
  summary["step"] = flow.step;
  summary["mode"] = to_string(flow.mode);
  res.records.push_back(summary);
  return res;
}

// ---------------------------------------------------------------- crossing

struct CrossingReport {
  std::shared_ptr<const SelfDualSpace> space;
  double s_tilde = 0.0;
  double delta = 0.0;
  Matrix E_left, E_right;
  int sigma_across = 1;
  Matrix P_plus, P_minus, P_zero;
  int dim_K0 = 0, dim_K1 = 0;
  double splitting_residual = 0.0;  // ||P+ + P- + P0 - 1||
  double mirror_residual = 0.0;     // ||Gamma P+ Gamma - P-||
  double wedge_defect = 0.0;        // largest distance of a wedge eigenvalue from {0, 1}
  double richardson_left = 0.0, richardson_right = 0.0;
  WeakStar jump;
  Symbol s_one, s_right, s_left;

  bool in_K1(const Vector& v) const { return ((P_plus + P_minus) * v - v).norm() <= 1e-8 * std::max(1.0, v.norm()); }
  bool in_K0(const Vector& v) const { return (P_zero * v - v).norm() <= 1e-8 * std::max(1.0, v.norm()); }

  /// omega_lambda(a1 a0) = omega_{P+}(a1) (lambda omega_+(a0) + (1 - lambda) omega_-(a0)).
  Complex omega(double lambda, const Monomial& a1, const Monomial& a0) const {
    for (const auto& f : a1)
      if (!in_K1(f.phi)) throw Error(ErrorKind::SpaceMismatch, "a1 factor is not in K1");
    for (const auto& f : a0)
      if (!in_K0(f.phi)) throw Error(ErrorKind::SpaceMismatch, "a0 factor is not in K0");
    return evaluate(s_one, a1) * (lambda * evaluate(s_right, a0) + (1.0 - lambda) * evaluate(s_left, a0));
  }
};

namespace detail {
/// Orthonormal basis of the range of a projection.
inline Matrix range_basis(const Matrix& P, bool complement) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P + P.adjoint()));
  std::vector<int> cols;
  for (int k = 0; k < es.eigenvalues().size(); ++k)
    if ((es.eigenvalues()(k) > 0.5) != complement) cols.push_back(k);
  Matrix b(P.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) b.col(j) = es.eigenvectors().col(cols[j]);
  return b;
}

/// Within ran B, split by the compression of Q: eigenvalue ~1 goes to `one`, ~0 to `zero`.
inline void split_by(const Matrix& B, const Matrix& Q, double band, Matrix& one, Matrix& zero, double& defect) {
  const int n = static_cast<int>(B.rows());
  one = Matrix::Zero(n, n);
  zero = Matrix::Zero(n, n);
  if (B.cols() == 0) return;
  Matrix m = B.adjoint() * Q * B;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    const double l = es.eigenvalues()(k);
    defect = std::max(defect, std::min(std::abs(l), std::abs(1.0 - l)));
    if (l > band && l < 1.0 - band) {
      throw Error(ErrorKind::DegenerateWedge, "wedge eigenvalue " + std::to_string(l) + " is neither 0 nor 1", l);
    }
    const Vector v = B * es.eigenvectors().col(k);
    (l > 0.5 ? one : zero) += v * v.adjoint();
  }
}
}  // namespace detail

inline CrossingReport crossing_analysis(const ExperimentConfig& c, const HamiltonianPath& path, double s_tilde,
                                        double delta, int n_max = 64) {
  const auto& sp = *path.space;
  const double gap0 = min_abs_eigenvalue(path.at(s_tilde));
  if (gap0 > c.tol.gap_closed) {
    throw Error(ErrorKind::StillGapped, "gap at s = " + std::to_string(s_tilde) + " is " + std::to_string(gap0), gap0);
  }
  auto eplus = [&](double s) {
    const auto r = resolve_rel(c, path.at(s));
    if (!r.gapped()) {
      throw Error(ErrorKind::InvalidArgument, "gap still closed at s = " + std::to_string(s) + "; increase delta", s);
    }
    return r.E_plus;
  };
  CrossingReport rep;
  rep.space = path.space;
  rep.s_tilde = s_tilde;
  // Richardson check: E at delta and delta/2 must agree to 1e-3, else shrink
  double d = delta;
  for (int tries = 0;; ++tries) {
    rep.E_right = eplus(s_tilde + d);
    rep.E_left = eplus(s_tilde - d);
    rep.richardson_right = op_norm(rep.E_right - eplus(s_tilde + d / 2));
    rep.richardson_left = op_norm(rep.E_left - eplus(s_tilde - d / 2));
    if (std::max(rep.richardson_left, rep.richardson_right) <= 1e-3 || tries == 20) break;
    d /= 2;
  }
  rep.delta = d;
  rep.sigma_across = z2_index(sp, rep.E_right, rep.E_left).sigma;

  const double band = 1e-3;
  const Matrix BR = detail::range_basis(rep.E_right, false);
  const Matrix BRc = detail::range_basis(rep.E_right, true);
  Matrix q_right, q_left;
  detail::split_by(BR, rep.E_left, band, rep.P_plus, q_right, rep.wedge_defect);   // E_R ∧ E_L, E_R ∧ E_L^perp
  detail::split_by(BRc, rep.E_left, band, q_left, rep.P_minus, rep.wedge_defect);  // E_R^perp ∧ E_L, complement wedge
  rep.P_zero = q_right + q_left;
  const int n = sp.dim();
  rep.splitting_residual = op_norm(rep.P_plus + rep.P_minus + rep.P_zero - Matrix::Identity(n, n));
  rep.mirror_residual = op_norm(sp.conjugate(rep.P_plus) - rep.P_minus);
  rep.dim_K0 = static_cast<int>(std::lround(rep.P_zero.trace().real()));
  rep.dim_K1 = n - rep.dim_K0;
  rep.s_one = make_symbol(path.space, rep.P_plus + 0.5 * rep.P_zero);
  rep.s_right = make_symbol(path.space, rep.E_right);
  rep.s_left = make_symbol(path.space, rep.E_left);
  rep.jump = weakstar_distance(rep.s_left, rep.s_right, n_max);
  return rep;
}

namespace detail {
inline Vector random_in(const Matrix& P, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector v(P.rows());
  for (int i = 0; i < v.size(); ++i) v(i) = Complex(nd(rng), nd(rng));
  v = P * v;
  const double nv = v.norm();
  return nv > 0 ? Vector(v / nv) : v;
}
}  // namespace detail

struct LambdaCheck {
  double right = 0.0;  // lambda = 1 against omega_{E+}; exact by construction of the splitting
  double left = 0.0;   // lambda = 0 against omega_{E-}; carries the O(delta) one-sided error
};

/// Compares the lambda family with direct evaluation of the one-sided
/// symbols, on products a1 a0 and on K1-only observables.
inline LambdaCheck lambda_family_check(const CrossingReport& r, std::uint64_t seed, int trials = 8) {
  std::mt19937_64 rng(seed);
  const Matrix K1 = r.P_plus + r.P_minus;
  LambdaCheck out;
  for (int t = 0; t < trials; ++t) {
    Monomial a1, a0;
    const int len1 = 2 + 2 * (t % 2);
    for (int k = 0; k < len1; ++k) a1.push_back({detail::random_in(K1, rng), k % 2 == 0});
    if (r.dim_K0 > 0)
      for (int k = 0; k < 2; ++k) a0.push_back({detail::random_in(r.P_zero, rng), k % 2 == 1});
    Monomial both = a1;
    both.insert(both.end(), a0.begin(), a0.end());
    out.right = std::max(out.right, std::abs(r.omega(1.0, a1, a0) - evaluate(r.s_right, both)));
    out.left = std::max(out.left, std::abs(r.omega(0.0, a1, a0) - evaluate(r.s_left, both)));
    const Complex half = r.omega(0.5, a1, {});
    out.right = std::max(out.right, std::abs(half - evaluate(r.s_right, a1)));
    out.left = std::max(out.left, std::abs(half - evaluate(r.s_left, a1)));
  }
  return out;
}

inline RunResult run_crossing(const ExperimentConfig& c) {
  GapClosing g;
  RunResult res = find_gap_closing(c, &g);
  res.command = "crossing";
  res.row_type = "crossing";
  const auto mp = build_model_path(c, single_run_seed(c));
  const auto rep = crossing_analysis(c, mp.path, g.s_tilde, c.tol.crossing_delta, c.weakstar_n_max);
  const auto fam = lambda_family_check(rep, c.master_seed);
  res.records.push_back({{"type", "crossing"},
                         {"s_tilde", rep.s_tilde},
                         {"delta", rep.delta},
                         {"sigma_across", rep.sigma_across},
                         {"dim_K0", rep.dim_K0},
                         {"dim_K1", rep.dim_K1},
                         {"splitting_residual", rep.splitting_residual},
                         {"mirror_residual", rep.mirror_residual},
                         {"wedge_defect", rep.wedge_defect},
                         {"richardson_left", rep.richardson_left},
                         {"richardson_right", rep.richardson_right},
                         {"lambda_residual_right", fam.right},
                         {"lambda_residual_left", fam.left},
                         {"weakstar_distance", rep.jump.distance},
                         {"weakstar_first_separating", rep.jump.first_separating},
                         {"weakstar_first_difference", rep.jump.first_difference},
                         {"weakstar_lower_bound", rep.jump.lower_bound}});
  if (rep.splitting_residual > 1e-8) res.fail("P+ + P- + P0 - 1 has norm " + std::to_string(rep.splitting_residual));
  if (!g.accidental_only && rep.sigma_across != -1) res.fail("sigma across a parity change is +1");
  if (fam.right > 1e-8) res.fail("lambda = 1 deviates from omega_{E+} by " + std::to_string(fam.right));
  // E- at s - delta is trusted only to the one-sided (Richardson) accuracy
  if (fam.left > 1e-3) res.fail("lambda = 0 deviates from omega_{E-} by " + std::to_string(fam.left));
  if (!(rep.jump.lower_bound > 0)) res.fail("no separating observable for the one-sided states");
  return res;
}

// ---------------------------------------------------------------- ensemble

struct Realization {
  int index = 0;
  std::uint64_t seed = 0;
  double gap = 0.0;
  bool gapped = false;
  int sigma = 0;  // vs. the clean model; 0 when undefined
  std::optional<DecayFit> decay;
};

inline std::vector<Realization> ensemble_members(const ExperimentConfig& c, int n) {
  if (c.model.kind != ModelKind::Anderson) throw Error(ErrorKind::InvalidArgument, "ensemble needs model.kind anderson");
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "ensemble needs at least one realization");
  auto clean = anderson_params(c, 0);
  clean.lambda = 0.0;
  const auto h_clean = build_anderson_self_dual(clean);
  const auto r_clean = resolve_rel(c, h_clean.matrix());
  return parallel_map(n, [&](int i) {
    Realization out;
    out.index = i;
    out.seed = derive_seed(c.master_seed, static_cast<std::uint64_t>(i));
    const auto h = build_anderson_self_dual(anderson_params(c, out.seed));
    const auto r = resolve_rel(c, h.matrix());
    out.gap = r.min_abs_eigenvalue;
    out.gapped = r.gapped();
    if (out.gapped && r_clean.gapped()) out.sigma = z2_index(h.space(), r_clean.E_plus, r.E_plus).sigma;
    if (out.gapped) {
      try {
        out.decay = decay_fit(h.space(), r.E_plus, c.model.lattice.epsilon);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientData) throw;
      }
    }
    return out;
  });
}

inline RunResult ensemble_run(const ExperimentConfig& c, int n) {
  RunResult res{"ensemble", "realization", {}, {}, {}};
  const auto members = ensemble_members(c, n);
  auto clean = anderson_params(c, 0);
  clean.lambda = 0.0;
  const bool base_gapped = resolve_rel(c, build_anderson_self_dual(clean).matrix()).gapped();
  double sum = 0, lo = std::numeric_limits<double>::infinity(), hi = 0, rate_sum = 0;
  int plus = 0, minus = 0, undefined = 0, fits = 0;
  for (const auto& m : members) {
    Json rec{{"type", "realization"}, {"index", m.index}, {"seed", m.seed}, {"gap", m.gap}, {"gapped", m.gapped}};
    rec["sigma"] = m.sigma == 0 ? Json(nullptr) : Json(m.sigma);
    rec["decay_rate"] = m.decay ? Json(m.decay->rate) : Json(nullptr);
    rec["decay_residual"] = m.decay ? Json(m.decay->residual) : Json(nullptr);
    res.records.push_back(rec);
    sum += m.gap;
    lo = std::min(lo, m.gap);
    hi = std::max(hi, m.gap);
    (m.sigma == 1 ? plus : m.sigma == -1 ? minus : undefined)++;
    if (m.decay) {
      rate_sum += m.decay->rate;
      ++fits;
    }
  }
  res.records.push_back({{"type", "summary"},
                         {"realizations", n},
                         {"base_gapped", base_gapped},
                         {"mean_gap", sum / n},
                         {"min_gap", lo},
                         {"max_gap", hi},
                         {"sigma_plus", plus},
                         {"sigma_minus", minus},
                         {"sigma_undefined", undefined},
                         {"mean_decay_rate", fits ? Json(rate_sum / fits) : Json(nullptr)}});
  if (base_gapped) {
    if (undefined > 0) res.fail(std::to_string(undefined) + " realizations without a gap");
    if (plus > 0 && minus > 0) res.fail("sigma is not uniform across realizations");
  }
  return res;
}

// ---------------------------------------------------------------- finite size

struct WindowResult {
  int L = 0;
  int sites = 0;
  int sigma = 0;  // endpoint sigma, 0 when undefined
  bool flowed = false;
  Complex det{1.0, 0.0};
  double deficit_per_site = 0.0;
  double transport_error = 0.0;
  double min_gap = 0.0;
};

inline WindowResult study_window(const ExperimentConfig& c, const HamiltonianPath& path, int L, int sites) {
  WindowResult w;
  w.L = L;
  w.sites = sites;
  w.sigma = endpoint_sigma(c, path);
  const auto scan = fine_scan(path, c.path.grid);
  w.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& q : scan) w.min_gap = std::min(w.min_gap, q.gap);
  if (!scan_has_closing(scan, c.tol.gap_closed)) {
    const auto f = integrate_flow(path, uniform_grid(c.path.grid), FilterProfile{}, flow_mode(c), step_control(c));
    w.flowed = true;
    w.det = f.points.back().det;
    w.deficit_per_site = f.points.back().deficit / w.sites;
    w.transport_error = f.transport_error;
  }
  return w;
}

inline std::vector<WindowResult> finite_size_windows(const ExperimentConfig& c) {
  ExperimentConfig big = c;
  if (c.model.kind == ModelKind::Kitaev) big.model.n_sites = c.finite_size.big;
  else if (c.model.kind == ModelKind::Anderson) big.model.lattice.L = c.finite_size.big;
  else throw Error(ErrorKind::InvalidArgument, "finite-size study needs a lattice model");
  const auto mp = build_model_path(big, single_run_seed(c));
  const SelfDualHamiltonian h0(mp.path.space, mp.path.at(0.0), {});
  const auto& Ls = c.finite_size.L;
  return parallel_map(static_cast<int>(Ls.size()), [&](int i) {
    const int L = Ls[i];
    if (c.model.kind == ModelKind::Kitaev && c.model.boundary == Boundary::Periodic) {
      // a window of a ring is an open chain; periodic studies use rings of L sites instead
      ExperimentConfig ring = c;
      ring.model.n_sites = L;
      validate_config(ring);
      const auto rp = build_model_path(ring, 0);
      return study_window(c, rp.path, L, L);
    }
    Restriction r = [&] {
      if (c.model.kind == ModelKind::Kitaev) {
        if (L < 1 || L > c.finite_size.big) throw Error(ErrorKind::BoxMismatch, "window larger than the chain", L);
        const int a = (c.finite_size.big - L) / 2;
        return restrict_to(h0, [a, L](const std::vector<int>& x) { return x[0] >= a && x[0] < a + L; });
      }
      return restrict_finite_volume(h0, L);
    }();
    const int per_site = 2 * (c.model.kind == ModelKind::Anderson ? c.model.lattice.spins : 1);
    return study_window(c, restrict_path(mp.path, r.inner.space_ptr(), r.kept), L,
                        static_cast<int>(r.kept.size()) / per_site);
  });
}

inline RunResult finite_size_study(const ExperimentConfig& c) {
  RunResult res{"finite-size", "window", {}, {}, {}};
  const auto ws = finite_size_windows(c);
  std::vector<double> deficits;
  double bound = 0.0;
  for (const auto& w : ws) {
    Json rec{{"type", "window"}, {"L", w.L}, {"sites", w.sites}, {"min_gap", w.min_gap}};
    rec["sigma"] = w.sigma == 0 ? Json(nullptr) : Json(w.sigma);
    rec["flowed"] = w.flowed;
    if (w.flowed) {
      rec["det_re"] = w.det.real();
      rec["det_im"] = w.det.imag();
      rec["deficit_per_site"] = w.deficit_per_site;
      rec["transport_error"] = w.transport_error;
      if (std::abs(w.det - Complex(1.0)) > c.tol.det) res.fail("det V_1 != 1 at L = " + std::to_string(w.L));
      if (w.transport_error > c.tol.transport) res.fail("transport error too large at L = " + std::to_string(w.L));
      deficits.push_back(w.deficit_per_site);
      bound = std::max(bound, w.deficit_per_site);
    }
    res.records.push_back(rec);
  }
  // sigma stabilizes from L0 on
  int L0 = ws.empty() ? 0 : ws.back().L;
  for (int i = static_cast<int>(ws.size()) - 1; i >= 0 && ws[i].sigma == ws.back().sigma; --i) L0 = ws[i].L;
  Json diffs = Json::array();
  for (std::size_t i = 1; i < deficits.size(); ++i) diffs.push_back(deficits[i] - deficits[i - 1]);
  bool decreasing = true;
  if (deficits.size() == ws.size() && deficits.size() >= 3) {
    // successive differences over the top half of the L range
    const std::size_t first = deficits.size() / 2;
    for (std::size_t i = first + 1; i < deficits.size() - 1; ++i) {
      if (std::abs(deficits[i + 1] - deficits[i]) >= std::abs(deficits[i] - deficits[i - 1])) decreasing = false;
    }
    if (!decreasing) res.fail("deficit differences do not decrease over the top half of the L range");
  }
  res.records.push_back({{"type", "summary"},
                         {"deficit_bound", bound},
                         {"deficit_differences", diffs},
                         {"differences_decreasing", decreasing},
                         {"sigma_stable_from", L0},
                         {"sigma", ws.empty() || ws.back().sigma == 0 ? Json(nullptr) : Json(ws.back().sigma)}});
  if (deficits.empty()) res.warnings.push_back("no window is gapped along the whole path; nothing was flowed");
  return res;
}

// ---------------------------------------------------------------- Combes-Thomas

inline RunResult ct_check(const ExperimentConfig& c) {
  RunResult res{"ct-check", "instance", {}, {}, {}};
  const int n = c.model.kind == ModelKind::Anderson ? c.ct.instances : 1;
  auto hamiltonian = [&](int i) -> SelfDualHamiltonian {
    switch (c.model.kind) {
      case ModelKind::Anderson: return build_anderson_self_dual(anderson_params(c, derive_seed(c.master_seed, i)));
      case ModelKind::Kitaev: return build_kitaev_chain(c.model.n_sites, c.model.t, c.model.mu, c.model.delta, c.model.boundary);
      case ModelKind::Custom: return load_custom(c).first;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown model");
  };
  const auto reports = parallel_map(n, [&](int i) {
    const auto h = hamiltonian(i);
    std::vector<CtReport> out;
    for (auto z : c.ct.z) out.push_back(ct_verify(h, c.ct.mu, c.ct.epsilon, z));
    return out;
  });
  long general_checked = 0, gapped_checked = 0, violations = 0;
  double worst_general = 0, worst_gapped = 0;
  for (int i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c.ct.z.size(); ++k) {
      const auto& r = reports[i][k];
      res.records.push_back({{"type", "instance"},
                             {"index", i},
                             {"z_re", c.ct.z[k].real()},
                             {"z_im", c.ct.z[k].imag()},
                             {"S", r.params.S_value},
                             {"Delta", r.params.Delta_value},
                             {"gap", r.gap},
                             {"general", to_string(r.general.status)},
                             {"general_worst_ratio", r.general.worst_ratio},
                             {"general_violations", r.general.violations},
                             {"gapped", to_string(r.gapped.status)},
                             {"gapped_worst_ratio", r.gapped.worst_ratio},
                             {"gapped_violations", r.gapped.violations}});
      if (r.general.status != CtStatus::NotApplicable) {
        ++general_checked;
        worst_general = std::max(worst_general, r.general.worst_ratio);
      }
      if (r.gapped.status != CtStatus::NotApplicable) {
        ++gapped_checked;
        worst_gapped = std::max(worst_gapped, r.gapped.worst_ratio);
      }
      violations += r.general.violations + r.gapped.violations;
    }
  res.records.push_back({{"type", "summary"},
                         {"instances", n},
                         {"general_checked", general_checked},
                         {"gapped_checked", gapped_checked},
                         {"general_worst_ratio", worst_general},
                         {"gapped_worst_ratio", worst_gapped},
                         {"violations", violations}});
  if (violations > 0) res.fail(std::to_string(violations) + " resolvent bound violations");
  return res;
}

// ---------------------------------------------------------------- index

inline RunResult run_index(const ExperimentConfig& c) {
  RunResult res{"index", "index", {}, {}, {}};
  const auto mp = build_model_path(c, single_run_seed(c));
  const auto& path = mp.path;
  const auto r0 = resolve_rel(c, path.at(0.0));
  const auto r1 = resolve_rel(c, path.at(1.0));
  if (!r0.gapped()) throw Error(ErrorKind::GapClosed, "H_0 has zero in its spectrum");
  if (!r1.gapped()) throw Error(ErrorKind::GapClosed, "H_1 has zero in its spectrum");
  IndexTolerances tol;
  tol.one = c.tol.index_one;
  tol.map = std::max(tol.map, 10 * c.tol.transport);  // a flow unitary is only as good as its transport
  Json rec{{"type", "index"}};
  try {
    const auto scan = fine_scan(path, c.path.grid);
    std::optional<Matrix> U;
    if (!scan_has_closing(scan, c.tol.gap_closed)) {
      const auto f = integrate_flow(path, uniform_grid(c.path.grid), FilterProfile{}, flow_mode(c), step_control(c));
      U = f.V.back().adjoint();
      rec["transport_error"] = f.transport_error;
    }
    const auto ix = z2_index(*path.space, r0.E_plus, r1.E_plus, U ? &*U : nullptr, tol);
    rec["sigma"] = ix.sigma;
    rec["dim_intersection"] = ix.dim_intersection;
    rec["kernel_dim"] = ix.kernel_dim;
    rec["sigma_det"] = ix.sigma_det ? Json(*ix.sigma_det) : Json(nullptr);
    rec["conditioning"] = ix.conditioning;
    rec["conditioning_warning"] = ix.conditioning_warning;
    rec["methods_agree"] = ix.methods_agree;
    rec["parity_0"] = pfaffian_parity(*path.space, path.at(0.0));
    rec["parity_1"] = pfaffian_parity(*path.space, path.at(1.0));
    if (ix.conditioning_warning) res.warnings.push_back("intersection counting is poorly conditioned");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MethodDisagreement) throw;
    rec["methods_agree"] = false;
    res.fail(e.what());
  }
  res.records.push_back(rec);
  return res;
}

// ---------------------------------------------------------------- selftest

inline RunResult selftest(std::uint64_t seed) {
  RunResult res{"selftest", "check", {}, {}, {}};
  auto check = [&](const std::string& name, double value, double limit) {
    const bool pass = value <= limit;
    res.records.push_back({{"type", "check"}, {"name", name}, {"value", value}, {"limit", limit}, {"pass", pass}});
    if (!pass) res.fail(name + ": " + std::to_string(value) + " > " + std::to_string(limit));
  };
  {
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const int n = 2 * (1 + k % 6);
      Matrix a = sdcar::detail::gaussian_matrix(n, derive_seed(seed, k));
      a = a - a.transpose().eval();
      const Complex pf = pfaffian(a);
      const Complex det = a.determinant();
      worst = std::max(worst, std::abs(pf * pf - det) / std::max(1.0, std::abs(det)));
    }
    check("pfaffian_squared_equals_det", worst, 1e-9);
  }
  {
    auto space = std::make_shared<const SelfDualSpace>(make_mode_space(2));
    const auto h = random_self_dual(space, derive_seed(seed, 100));
    const auto sym = gibbs_symbol(h, 1.0);
    FockOracle fock(space);
    const Matrix rho = fock.gibbs_density(h.matrix(), 1.0);
    double worst = 0;
    for (int i = 0; i < space->dim(); ++i)
      for (int j = 0; j < space->dim(); ++j) {
        const Monomial m{{basis_vector(space->dim(), i), true}, {basis_vector(space->dim(), j), false}};
        worst = std::max(worst, std::abs(evaluate(sym, m) - fock.expectation(rho, m)));
      }
    check("two_point_matches_fock", worst, 1e-9);
  }
  {
    auto space = std::make_shared<const SelfDualSpace>(make_mode_space(4));
    const Matrix P = space->canonical_projection();
    const Matrix U = random_bogoliubov(*space, derive_seed(seed, 200), 0.3);
    const Matrix Q = U.adjoint() * P * U;
    const auto ix = z2_index(*space, P, Q, &U);
    check("index_methods_agree", ix.methods_agree ? 0.0 : 1.0, 0.0);
  }
  {
    auto space = build_kitaev_chain(8, 1, 0, 1, Boundary::Periodic).space_ptr();
    auto model = [](double mu) { return build_kitaev_chain(8, 1, mu, 1, Boundary::Periodic).matrix(); };
    const auto f = integrate_flow(parameter_path(space, model, {0.0, 1.0}), uniform_grid(11));
    check("kitaev_transport", f.transport_error, 1e-6);
    check("kitaev_det", f.max_det_deviation, 1e-6);
  }
  return res;
}

// ---------------------------------------------------------------- output

inline Json config_header(const ExperimentConfig& c, const std::string& command) {
  return Json{{"type", "config"}, {"command", command}, {"config", c.to_json()}};
}

inline std::string jsonl_text(const ExperimentConfig& c, const RunResult& r) {
  std::ostringstream os;
  os << config_header(c, r.command).dump() << '\n';
  for (const auto& rec : r.records) os << rec.dump() << '\n';
  for (const auto& w : r.warnings) os << Json{{"type", "warning"}, {"message", w}}.dump() << '\n';
  os << Json{{"type", "status"}, {"ok", r.ok()}, {"failures", r.failures}}.dump() << '\n';
  return os.str();
}

namespace detail {
inline std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return s;
}
}  // namespace detail

inline std::string csv_text(const ExperimentConfig& c, const RunResult& r) {
  std::vector<std::string> cols;
  for (const auto& rec : r.records) {
    if (rec.value("type", "") != r.row_type) continue;
    for (auto it = rec.begin(); it != rec.end(); ++it)
      if (it.key() != "type" && std::find(cols.begin(), cols.end(), it.key()) == cols.end()) cols.push_back(it.key());
  }
  std::ostringstream os;
  os << "# config: " << config_header(c, r.command).dump() << '\n';
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (const auto& rec : r.records) {
    if (rec.value("type", "") != r.row_type) continue;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      os << (k ? "," : "");
      if (rec.contains(cols[k])) os << detail::csv_cell(rec.at(cols[k]));
    }
    os << '\n';
  }
  return os.str();
}

/// Writes <dir>/<command>.jsonl and, if enabled, <dir>/<command>.csv.
inline std::vector<std::string> write_outputs(const ExperimentConfig& c, const RunResult& r) {
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& ext, const std::string& text) {
    const auto p = (fs::path(c.out_dir) / (r.command + ext)).string();
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + p);
    out << text;
    written.push_back(p);
  };
  put(".jsonl", jsonl_text(c, r));
  if (c.csv) put(".csv", csv_text(c, r));
  return written;
}

}  // namespace sdcar::experiments
