#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sdcar {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

enum class ErrorKind {
  UnpairedLabel,
  NotHermitian,
  NotSelfDual,
  NotUnitary,
  NotGammaCommuting,
  DetNotReal,
  ShapeMismatch,
  BoxMismatch,
  EigensolverFailure,
  ZNearSpectrum,
  InsufficientData,
  GapClosed,
  CutoffTooLarge,
  GapClosedOnPath,
  IllConditioned,
  MethodDisagreement,
  NotBasisProjection,
  NotSkew,
  OddDimension,
  SpaceMismatch,
  TooManyModes,
  NotSymbol,
  NoSignChange,
  StillGapped,
  DegenerateWedge,
  ParseError,
  InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnpairedLabel: return "UnpairedLabel";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotSelfDual: return "NotSelfDual";
    case ErrorKind::NotUnitary: return "NotUnitary";
    case ErrorKind::NotGammaCommuting: return "NotGammaCommuting";
    case ErrorKind::DetNotReal: return "DetNotReal";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::BoxMismatch: return "BoxMismatch";
    case ErrorKind::EigensolverFailure: return "EigensolverFailure";
    case ErrorKind::ZNearSpectrum: return "ZNearSpectrum";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::GapClosed: return "GapClosed";
    case ErrorKind::CutoffTooLarge: return "CutoffTooLarge";
    case ErrorKind::GapClosedOnPath: return "GapClosedOnPath";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::MethodDisagreement: return "MethodDisagreement";
    case ErrorKind::NotBasisProjection: return "NotBasisProjection";
    case ErrorKind::NotSkew: return "NotSkew";
    case ErrorKind::OddDimension: return "OddDimension";
    case ErrorKind::SpaceMismatch: return "SpaceMismatch";
    case ErrorKind::TooManyModes: return "TooManyModes";
    case ErrorKind::NotSymbol: return "NotSymbol";
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::StillGapped: return "StillGapped";
    case ErrorKind::DegenerateWedge: return "DegenerateWedge";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Library error. `residual()` carries the violated quantity when one exists
/// (a norm, a parameter value, an offending s), otherwise 0.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, double residual = 0.0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        residual_(residual) {}

  ErrorKind kind() const noexcept { return kind_; }
  double residual() const noexcept { return residual_; }

 private:
  ErrorKind kind_;
  double residual_;
};

/// Spectral (operator 2-) norm. Dense, so only for desk-scale matrices.
inline double op_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Polar factor U of m = U |m|.
inline Matrix polar_unitary(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// exp(i t A) for Hermitian A.
inline Matrix hermitian_exp_i(const Matrix& a, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::EigensolverFailure, "hermitian exponential");
  }
  Vector phases = (kI * t * es.eigenvalues().cast<Complex>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace sdcar
