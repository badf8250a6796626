#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "sdcar/self_dual.hpp"

namespace sdcar {

struct SpectralResolution {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // columns
  double gap = 0.0;
  bool gap_defined = false;
  double min_abs_eigenvalue = 0.0;
  double zero_tol = 0.0;
  Matrix E_plus, E_minus, E_zero;

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  bool gapped() const { return gap_defined && E_zero.trace().real() < 0.5; }
  /// Indices with eigenvalue > zero_tol.
  std::vector<int> positive() const {
    std::vector<int> out;
    for (int k = 0; k < dim(); ++k)
      if (eigenvalues(k) > zero_tol) out.push_back(k);
    return out;
  }
};

inline double default_zero_tol(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return 1e-8 * (es.eigenvalues().size() ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0);
}

/// Eigendecomposition of a Hermitian matrix. zero_tol < 0 selects 1e-8 ||H||.
inline SpectralResolution resolve(const Matrix& h, double zero_tol = -1.0) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::EigensolverFailure, "Hermitian eigensolver failed");
  SpectralResolution r;
  r.eigenvalues = es.eigenvalues();
  r.eigenvectors = es.eigenvectors();
  const int n = r.dim();
  const double norm = n ? r.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  r.zero_tol = zero_tol < 0 ? 1e-8 * norm : zero_tol;
  r.E_plus = Matrix::Zero(n, n);
  r.E_minus = Matrix::Zero(n, n);
  r.E_zero = Matrix::Zero(n, n);
  r.min_abs_eigenvalue = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const double l = r.eigenvalues(k);
    const auto v = r.eigenvectors.col(k);
    r.min_abs_eigenvalue = std::min(r.min_abs_eigenvalue, std::abs(l));
    if (l > r.zero_tol) {
      r.E_plus.noalias() += v * v.adjoint();
    } else if (l < -r.zero_tol) {
      r.E_minus.noalias() += v * v.adjoint();
    } else {
      r.E_zero.noalias() += v * v.adjoint();
    }
    if (std::abs(l) > r.zero_tol) gap = std::min(gap, std::abs(l));
  }
  r.gap_defined = std::isfinite(gap);
  r.gap = r.gap_defined ? gap : 0.0;
  if (n == 0) r.min_abs_eigenvalue = 0.0;
  return r;
}

inline SpectralResolution resolve(const SelfDualHamiltonian& h, double zero_tol = -1.0) {
  return resolve(h.matrix(), zero_tol);
}

/// Closed gap means: some |lambda| <= zero_tol.
inline bool gap_closed(const SpectralResolution& r) { return r.E_zero.trace().real() > 0.5; }

/// e^{itH}.
inline Matrix propagator(const SpectralResolution& r, double t) {
  Vector ph = (kI * t * r.eigenvalues.cast<Complex>()).array().exp();
  return r.eigenvectors * ph.asDiagonal() * r.eigenvectors.adjoint();
}

/// <e_x, (z - H)^{-1} e_y> from the eigenbasis.
inline Complex resolvent_element(const SpectralResolution& r, Complex z, int x, int y) {
  Complex acc = 0.0;
  for (int k = 0; k < r.dim(); ++k) {
    const Complex den = z - r.eigenvalues(k);
    if (std::abs(den) < 1e-12) throw Error(ErrorKind::ZNearSpectrum, "z within 1e-12 of an eigenvalue", std::abs(den));
    acc += r.eigenvectors(x, k) * std::conj(r.eigenvectors(y, k)) / den;
  }
  return acc;
}

/// Full resolvent (z - H)^{-1}.
inline Matrix resolvent(const SpectralResolution& r, Complex z) {
  Vector inv(r.dim());
  for (int k = 0; k < r.dim(); ++k) {
    const Complex den = z - r.eigenvalues(k);
    if (std::abs(den) < 1e-12) throw Error(ErrorKind::ZNearSpectrum, "z within 1e-12 of an eigenvalue", std::abs(den));
    inv(k) = 1.0 / den;
  }
  return r.eigenvectors * inv.asDiagonal() * r.eigenvectors.adjoint();
}

inline double distance_to_spectrum(const SpectralResolution& r, Complex z) {
  double d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < r.dim(); ++k) d = std::min(d, std::abs(z - r.eigenvalues(k)));
  return d;
}

struct DecayParams {
  double mu = 0.0;
  double epsilon = 1.0;
  double S_value = 0.0;
  double Delta_value = 0.0;
};

/// S(H, mu) = max_x sum_y (e^{mu d(x,y)^eps} - 1)|H_xy|.
inline double ct_S(const SelfDualSpace& space, const Matrix& h, double mu, double epsilon) {
  double worst = 0.0;
  for (int x = 0; x < space.dim(); ++x) {
    double row = 0.0;
    for (int y = 0; y < space.dim(); ++y) {
      const double a = std::abs(h(x, y));
      if (a == 0.0) continue;
      row += std::expm1(mu * std::pow(space.distance(x, y), epsilon)) * a;
    }
    worst = std::max(worst, row);
  }
  return worst;
}

inline DecayParams ct_constants(const SelfDualHamiltonian& h, double mu, double epsilon, Complex z) {
  if (mu < 0) throw Error(ErrorKind::InvalidArgument, "mu must be >= 0", mu);
  if (!(epsilon > 0 && epsilon <= 1)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0,1]", epsilon);
  DecayParams p;
  p.mu = mu;
  p.epsilon = epsilon;
  p.S_value = ct_S(h.space(), h.matrix(), mu, epsilon);
  p.Delta_value = distance_to_spectrum(resolve(h), z);
  return p;
}

enum class CtStatus { Pass, Fail, NotApplicable };

inline const char* to_string(CtStatus s) {
  switch (s) {
    case CtStatus::Pass: return "pass";
    case CtStatus::Fail: return "fail";
    case CtStatus::NotApplicable: return "not_applicable";
  }
  return "?";
}

struct CtBoundReport {
  CtStatus status = CtStatus::NotApplicable;
  double worst_ratio = 0.0;  // max |R_xy| / bound_xy
  int worst_x = -1, worst_y = -1;
  long violations = 0;
};

struct CtReport {
  DecayParams params;
  double gap = 0.0;
  CtBoundReport general;
  CtBoundReport gapped;
};

namespace detail {
template <class Bound>
CtBoundReport check_pairs(const SelfDualSpace& space, const Matrix& res, double epsilon, Bound bound) {
  CtBoundReport rep;
  rep.status = CtStatus::Pass;
  for (int x = 0; x < space.dim(); ++x)
    for (int y = 0; y < space.dim(); ++y) {
      const double b = bound(std::pow(space.distance(x, y), epsilon));
      const double ratio = std::abs(res(x, y)) / b;
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.worst_x = x;
        rep.worst_y = y;
      }
      // a few ulps of slack for pairs where the bound is attained
      if (ratio > 1.0 + 1e-12) ++rep.violations;
    }
  if (rep.violations > 0) rep.status = CtStatus::Fail;
  return rep;
}
}  // namespace detail

/// Checks both resolvent bounds at every label pair.
/// General: |R_xy| <= e^{-mu d^eps} / (Delta - S), needs Delta > S.
/// Gapped:  |R_xy| <= (4/g) exp(-mu min{1, g/(4S)} d^eps), needs Delta >= g/2 with g the gap.
inline CtReport ct_verify(const SelfDualHamiltonian& h, double mu, double epsilon, Complex z) {
  const auto r = resolve(h);
  CtReport rep;
  rep.params = ct_constants(h, mu, epsilon, z);
  rep.gap = r.gap_defined && !gap_closed(r) ? r.gap : 0.0;
  const double delta = rep.params.Delta_value;
  const double S = rep.params.S_value;
  if (delta < 1e-12) return rep;  // z on the spectrum, nothing to check
  const Matrix res = resolvent(r, z);
  if (delta > S) {
    rep.general = detail::check_pairs(h.space(), res, epsilon,
                                      [&](double de) { return std::exp(-mu * de) / (delta - S); });
  }
  const double g = rep.gap;
  if (g > 0 && delta >= g / 2) {
    const double rate = S > 0 ? mu * std::min(1.0, g / (4 * S)) : mu;
    rep.gapped = detail::check_pairs(h.space(), res, epsilon,
                                     [&](double de) { return 4.0 / g * std::exp(-rate * de); });
  }
  return rep;
}

struct DecayFit {
  double rate = 0.0;       // fitted mu in |K| ~ C e^{-mu d^eps}
  double intercept = 0.0;  // log C
  double residual = 0.0;   // rms of the log fit
  int pairs = 0;
};

/// Least squares of log|K_xy| against d(x,y)^eps over x != y with |K_xy| > floor.
inline DecayFit decay_fit(const SelfDualSpace& space, const Matrix& kernel, double epsilon = 1.0,
                          double floor = 1e-14) {
  std::vector<double> xs, ys;
  std::set<double> distinct;
  for (int x = 0; x < space.dim(); ++x)
    for (int y = 0; y < space.dim(); ++y) {
      if (x == y) continue;
      const double a = std::abs(kernel(x, y));
      if (a <= floor) continue;
      const double de = std::pow(space.distance(x, y), epsilon);
      xs.push_back(de);
      ys.push_back(std::log(a));
      distinct.insert(std::round(de * 1e9) / 1e9);
    }
  if (xs.size() < 10) throw Error(ErrorKind::InsufficientData, "fewer than 10 usable pairs", xs.size());
  if (distinct.size() < 2) throw Error(ErrorKind::InsufficientData, "all usable pairs at one distance");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  DecayFit f;
  const double slope = sxy / sxx;
  f.rate = -slope;
  f.intercept = my - slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (f.intercept + slope * xs[i]);
    ss += e * e;
  }
  f.residual = std::sqrt(ss / n);
  f.pairs = static_cast<int>(xs.size());
  return f;
}

}  // namespace sdcar
