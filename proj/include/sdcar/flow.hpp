#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "sdcar/self_dual.hpp"
#include "sdcar/spectral.hpp"

namespace sdcar {

/// Odd profile with J(nu) = -1/nu for |nu| >= nu0, linear -nu/nu0^2 inside.
struct FilterProfile {
  double nu0 = 0.0;
  double operator()(double nu) const {
    if (std::abs(nu) >= nu0) return -1.0 / nu;
    return -nu / (nu0 * nu0);
  }
};

enum class FlowMode { Kato, Filter };

inline const char* to_string(FlowMode m) { return m == FlowMode::Kato ? "kato" : "filter"; }

/// Generator D with dE+/ds = -i[D, E+]. Built in the eigenbasis of H_s.
inline Matrix flow_generator(const SpectralResolution& r, const Matrix& dH, const FilterProfile& profile,
                             FlowMode mode) {
  if (gap_closed(r) || !r.gap_defined || r.gap <= r.zero_tol) {
    throw Error(ErrorKind::GapClosed, "generator needs a gapped Hamiltonian", r.min_abs_eigenvalue);
  }
  const int n = r.dim();
  const Matrix& V = r.eigenvectors;
  const Matrix t = V.adjoint() * dH * V;
  Matrix d = Matrix::Zero(n, n);
  if (mode == FlowMode::Filter) {
    double min_cross = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (r.eigenvalues(a) > 0 && r.eigenvalues(b) < 0) {
          min_cross = std::min(min_cross, r.eigenvalues(a) - r.eigenvalues(b));
        }
    if (profile.nu0 > min_cross) {
      throw Error(ErrorKind::CutoffTooLarge, "nu0 exceeds the smallest cross-band difference", profile.nu0);
    }
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const double la = r.eigenvalues(a);
      const double lb = r.eigenvalues(b);
      const bool cross = (la > 0) != (lb > 0);
      if (mode == FlowMode::Kato) {
        if (cross) d(a, b) = -kI * t(a, b) / (la - lb);
      } else if (la != lb) {
        d(a, b) = kI * profile(la - lb) * t(a, b);
      }
    }
  Matrix out = V * d * V.adjoint();
  return 0.5 * (out + out.adjoint());
}

/// First-order perturbation theory for dE+/ds.
inline Matrix projection_derivative(const SpectralResolution& r, const Matrix& dH) {
  const int n = r.dim();
  const Matrix& V = r.eigenvectors;
  const Matrix t = V.adjoint() * dH * V;
  Matrix d = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double la = r.eigenvalues(a);
      const double lb = r.eigenvalues(b);
      if ((la > 0) == (lb > 0)) continue;
      d(a, b) = (la > 0 ? 1.0 : -1.0) * t(a, b) / (la - lb);
    }
  return V * d * V.adjoint();
}

/// s -> H_s with its exact derivative.
struct HamiltonianPath {
  std::shared_ptr<const SelfDualSpace> space;
  std::function<Matrix(double)> at;
  std::function<Matrix(double)> derivative_at;
};

inline HamiltonianPath linear_path(std::shared_ptr<const SelfDualSpace> space, Matrix h0, Matrix h1) {
  HamiltonianPath p;
  p.space = std::move(space);
  Matrix diff = h1 - h0;
  p.at = [h0, diff](double s) -> Matrix { return h0 + s * diff; };
  p.derivative_at = [diff](double) -> Matrix { return diff; };
  return p;
}

/// Path of a model affine in one parameter p, with p(s) piecewise linear
/// through equally spaced knots.
inline HamiltonianPath parameter_path(std::shared_ptr<const SelfDualSpace> space,
                                      const std::function<Matrix(double)>& model, std::vector<double> knots) {
  if (knots.size() < 2) throw Error(ErrorKind::InvalidArgument, "parameter path needs at least 2 knots");
  const Matrix base = model(0.0);
  const Matrix slope = model(1.0) - base;
  const int segs = static_cast<int>(knots.size()) - 1;
  auto seg_of = [segs](double s) { return std::clamp(static_cast<int>(std::floor(s * segs)), 0, segs - 1); };
  auto param = [knots, segs, seg_of](double s) {
    const int k = seg_of(s);
    const double u = s * segs - k;
    return knots[k] + u * (knots[k + 1] - knots[k]);
  };
  auto dparam = [knots, segs, seg_of](double s) {
    const int k = seg_of(s);
    return (knots[k + 1] - knots[k]) * segs;
  };
  HamiltonianPath p;
  p.space = std::move(space);
  p.at = [base, slope, param](double s) -> Matrix { return base + param(s) * slope; };
  p.derivative_at = [slope, dparam](double s) -> Matrix { return dparam(s) * slope; };
  return p;
}

struct StepControl {
  double h_init = 1e-2;
  double h_min = 1e-4;
  double transport_tol = 1e-6;
  double unitarity_tol = 1e-9;
};

struct FlowPoint {
  double s = 0.0;
  double transport_error = 0.0;
  Complex det{1.0, 0.0};
  double gamma_residual = 0.0;
  double deficit = 0.0;  // tr|1 - V_s|
  double gap = 0.0;
};

struct FlowResult {
  std::vector<FlowPoint> points;
  std::vector<Matrix> V;
  double transport_error = 0.0;
  double gamma_residual = 0.0;
  double max_det_deviation = 0.0;
  double max_drift = 0.0;  // largest ||V*V - 1|| seen before a polar correction
  double step = 0.0;       // step size that was finally used
  bool step_floor_reached = false;
  FlowMode mode = FlowMode::Kato;
};

inline double trace_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

inline std::vector<double> uniform_grid(int points) {
  if (points < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 points", points);
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = static_cast<double>(i) / (points - 1);
  return g;
}

namespace detail {
inline SpectralResolution gapped_resolution(const HamiltonianPath& path, double s) {
  auto r = resolve(path.at(s));
  if (gap_closed(r) || !r.gap_defined) throw Error(ErrorKind::GapClosedOnPath, "gap closes on the path", s);
  return r;
}

inline FlowResult integrate_once(const HamiltonianPath& path, const std::vector<double>& grid,
                                 const FilterProfile& profile, FlowMode mode, double h, const StepControl& ctl,
                                 const std::vector<SpectralResolution>& at_grid) {
  const int n = path.space->dim();
  const SelfDualSpace& sp = *path.space;
  FlowResult out;
  out.mode = mode;
  out.step = h;
  Matrix V = Matrix::Identity(n, n);
  const Matrix E0 = at_grid.front().E_plus;
  const Matrix I = Matrix::Identity(n, n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) {
      const double a = grid[i - 1];
      const double b = grid[i];
      const int steps = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
      const double hh = (b - a) / steps;
      for (int k = 0; k < steps; ++k) {
        const double mid = a + (k + 0.5) * hh;
        const auto r = gapped_resolution(path, mid);
        const Matrix D = flow_generator(r, path.derivative_at(mid), profile, mode);
        V = hermitian_exp_i(D, -hh) * V;
        const double drift = op_norm(V.adjoint() * V - I);
        out.max_drift = std::max(out.max_drift, drift);
        if (drift > ctl.unitarity_tol) V = polar_unitary(V);
      }
    }
    FlowPoint p;
    p.s = grid[i];
    p.gap = at_grid[i].gap;
    p.transport_error = op_norm(V.adjoint() * at_grid[i].E_plus * V - E0);
    p.det = determinant(V);
    p.gamma_residual = op_norm(V - sp.conjugate(V));
    p.deficit = trace_norm(I - V);
    out.transport_error = std::max(out.transport_error, p.transport_error);
    out.gamma_residual = std::max(out.gamma_residual, p.gamma_residual);
    out.max_det_deviation = std::max(out.max_det_deviation, std::abs(p.det - Complex(1.0)));
    out.points.push_back(p);
    out.V.push_back(V);
  }
  return out;
}
}  // namespace detail

/// Integrates dV/ds = -i D_s V with midpoint exponential steps. The whole
/// path is redone with a halved step until the transport error meets the
/// target or the step reaches h_min (then step_floor_reached is set).
inline FlowResult integrate_flow(const HamiltonianPath& path, const std::vector<double>& grid,
                                 FilterProfile profile = {}, FlowMode mode = FlowMode::Kato, StepControl ctl = {}) {
  if (grid.size() < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 points");
  std::vector<SpectralResolution> at_grid;
  at_grid.reserve(grid.size());
  double gmin = std::numeric_limits<double>::infinity();
  for (double s : grid) {
    at_grid.push_back(detail::gapped_resolution(path, s));
    gmin = std::min(gmin, at_grid.back().gap);
  }
  if (mode == FlowMode::Filter && profile.nu0 <= 0) profile.nu0 = 2.0 * gmin;
  double h = ctl.h_init;
  while (true) {
    auto res = detail::integrate_once(path, grid, profile, mode, h, ctl, at_grid);
    if (res.transport_error <= ctl.transport_tol) return res;
    if (h / 2 < ctl.h_min) {
      res.step_floor_reached = true;
      return res;
    }
    h /= 2;
  }
}

}  // namespace sdcar
