#pragma once

// Trajectory-quality policies: determinant check, Kay's prefactor-magnitude
// criterion, and eigenvalue taming of the monodromy matrix.

#include "scivr/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <optional>
#include <vector>

namespace scivr {

enum class TamingMode { Both, EigenvalueOnly, EigenvectorOnly };

inline std::string to_string(TamingMode m) {
  switch (m) {
    case TamingMode::Both:
      return "both";
    case TamingMode::EigenvalueOnly:
      return "eigenvalue";
    case TamingMode::EigenvectorOnly:
      return "eigenvector";
  }
  return "?";
}

struct StabilityPolicy {
  enum class Kind { None, RejectDet, RejectKay, Regularize };

  Kind kind = Kind::None;
  double det_tol = 1e-5;
  /// D_t. Non-positive means "use the ensemble size".
  double kay_threshold = 0.0;
  double eps_thr = 1.15e3;
  int max_modes = 2;
  TamingMode taming = TamingMode::Both;

  bool operator==(const StabilityPolicy&) const = default;
};

inline std::string to_string(StabilityPolicy::Kind k) {
  switch (k) {
    case StabilityPolicy::Kind::None:
      return "none";
    case StabilityPolicy::Kind::RejectDet:
      return "det";
    case StabilityPolicy::Kind::RejectKay:
      return "kay";
    case StabilityPolicy::Kind::Regularize:
      return "regularize";
  }
  return "?";
}

/// 1 - det(M^T M). Zero for any volume-preserving M, so it measures the
/// accumulated loss of phase-space volume, not full symplecticity.
template <class Derived>
double check_det(const Eigen::MatrixBase<Derived>& M) {
  // det(M^T M) = det(M)^2. Forming the product first squares the condition
  // number and trips the test on merely stretched regular orbits.
  const double d = M.determinant();
  return 1.0 - d * d;
}

/// Kay's criterion: true when |C_t|^2 >= D_t, i.e. the trajectory is dropped
/// from this step onward.
inline bool check_kay(cplx C, double D) { return std::norm(C) >= D; }

template <int N>
struct TamingResult {
  Eigen::Matrix<double, N, N> M;
  int tamed = 0;
  bool ok = true;
  double imag_residual = 0.0;
};

/// An eigenvalue counts as real when |Im l| < 1e-8 (1 + |l|).
inline bool is_real_eigenvalue(cplx l) {
  return std::abs(l.imag()) < 1e-8 * (1.0 + std::abs(l));
}

/// Zeroes the real eigen-directions of M with |Re l| >= eps_thr, largest
/// first, at most max_modes of them, and transforms back. Returns M unchanged
/// (bitwise) when nothing exceeds the threshold. ok == false signals a failed
/// decomposition; the caller must then drop the trajectory.
template <int N>
TamingResult<N> regularize(const Eigen::Matrix<double, N, N>& M, double eps_thr,
                           int max_modes, TamingMode mode = TamingMode::Both) {
  using CM = Eigen::Matrix<cplx, N, N>;
  TamingResult<N> out{M, 0, true, 0.0};
  if (!M.allFinite()) {
    out.ok = false;
    return out;
  }
  // Cheap exit: the spectral radius is bounded by any induced norm.
  if (M.cwiseAbs().rowwise().sum().maxCoeff() < eps_thr) return out;

  Eigen::EigenSolver<Eigen::Matrix<double, N, N>> es(M, true);
  if (es.info() != Eigen::Success) {
    out.ok = false;
    return out;
  }
  auto lambda = es.eigenvalues();
  std::vector<int> wild;
  for (int s = 0; s < lambda.size(); ++s)
    if (is_real_eigenvalue(lambda[s]) && std::abs(lambda[s].real()) >= eps_thr)
      wild.push_back(s);
  if (wild.empty()) return out;
  std::sort(wild.begin(), wild.end(), [&](int a, int b) {
    return std::abs(lambda[a].real()) > std::abs(lambda[b].real());
  });
  if (static_cast<int>(wild.size()) > max_modes) wild.resize(max_modes);

  CM U = es.eigenvectors();
  Eigen::FullPivLU<CM> lu(U);
  if (!lu.isInvertible()) {
    out.ok = false;
    return out;
  }
  CM Uinv = lu.inverse();
  Eigen::Matrix<cplx, N, 1> lam = lambda;
  for (int s : wild) {
    if (mode != TamingMode::EigenvectorOnly) lam[s] = 0.0;
    if (mode != TamingMode::EigenvalueOnly) {
      U.col(s).setZero();
      Uinv.row(s).setZero();
    }
  }
  CM tamed = U * lam.asDiagonal() * Uinv;
  out.M = tamed.real();
  out.imag_residual = tamed.imag().norm();
  out.tamed = static_cast<int>(wild.size());
  if (!out.M.allFinite() || out.imag_residual > 1e-8 * std::max(1.0, out.M.norm()))
    out.ok = false;
  return out;
}

/// First step at which a det/Kay policy drops the trajectory, scanning the
/// monodromy series of `record` and the exact prefactor `series` in lockstep.
/// Returns nullopt when the trajectory survives every recorded step.
template <class Record, class Series>
std::optional<int> first_rejection(const Record& record, const Series& series,
                                   const StabilityPolicy& policy, double kay_threshold) {
  const int n = static_cast<int>(std::min(record.monodromy.size(), series.C.size()));
  switch (policy.kind) {
    case StabilityPolicy::Kind::RejectDet:
      for (int k = 0; k < n; ++k)
        if (check_det(record.monodromy[k]) > policy.det_tol) return k;
      break;
    case StabilityPolicy::Kind::RejectKay:
      for (int k = 0; k < n; ++k)
        if (check_kay(series.C[k], kay_threshold)) return k;
      break;
    default:
      break;
  }
  return std::nullopt;
}

}  // namespace scivr
