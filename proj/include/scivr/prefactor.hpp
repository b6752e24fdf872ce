#pragma once

// Pre-exponential factor C_t under the exact and approximate treatments.
// Every method returns a PrefactorSeries with C_0 = 1 and a continuous phase.

#include "scivr/dynamics.hpp"
#include "scivr/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace scivr {

struct PrefactorMethod {
  enum class Kind { ExactMonodromy, ExactLogDerivative, Adiabatic, PoorPersons, Harmonic, Johnson, RtN };

  Kind kind = Kind::ExactMonodromy;
  int n = 1;  // order, RtN only

  bool operator==(const PrefactorMethod&) const = default;

  /// Methods built from the monodromy matrix; stability policies apply to these.
  bool uses_monodromy() const {
    return kind == Kind::ExactMonodromy || kind == Kind::ExactLogDerivative;
  }
};

/// Config key: exact, logderiv, adiabatic, pps, harmonic, johnson, rt<n>.
inline std::string to_string(const PrefactorMethod& m) {
  using K = PrefactorMethod::Kind;
  switch (m.kind) {
    case K::ExactMonodromy:
      return "exact";
    case K::ExactLogDerivative:
      return "logderiv";
    case K::Adiabatic:
      return "adiabatic";
    case K::PoorPersons:
      return "pps";
    case K::Harmonic:
      return "harmonic";
    case K::Johnson:
      return "johnson";
    case K::RtN:
      return "rt" + std::to_string(m.n);
  }
  return "?";
}

inline PrefactorMethod parse_prefactor_method(const std::string& s) {
  using K = PrefactorMethod::Kind;
  if (s == "exact") return {K::ExactMonodromy, 1};
  if (s == "logderiv") return {K::ExactLogDerivative, 1};
  if (s == "adiabatic") return {K::Adiabatic, 1};
  if (s == "pps") return {K::PoorPersons, 1};
  if (s == "harmonic") return {K::Harmonic, 1};
  if (s == "johnson") return {K::Johnson, 1};
  if (s.size() > 2 && s.rfind("rt", 0) == 0) {
    const std::string num = s.substr(2);
    if (num.find_first_not_of("0123456789") == std::string::npos && num.size() < 4) {
      int n = std::stoi(num);
      if (n >= 1) return {K::RtN, n};
    }
  }
  throw ConfigError("prefactor.methods", "unknown method '" + s + "'");
}

enum class JohnsonPolicy { Fail, ClampZero };

inline std::string to_string(JohnsonPolicy p) {
  return p == JohnsonPolicy::Fail ? "fail" : "clamp_zero";
}

inline JohnsonPolicy parse_johnson_policy(const std::string& s) {
  if (s == "fail") return JohnsonPolicy::Fail;
  if (s == "clamp_zero") return JohnsonPolicy::ClampZero;
  throw ConfigError("prefactor.johnson_policy", "expected fail or clamp_zero, got '" + s + "'");
}

/// C_t = |C_t| exp(i phi_t / hbar). The series ends early when the method
/// breaks down on this trajectory (`diverged` or `inapplicable`).
struct PrefactorSeries {
  std::vector<cplx> C;
  std::vector<double> phi;
  bool diverged = false;
  bool inapplicable = false;
  int flagged_steps = 0;        // RtN denominator guard hits
  int branch_warnings = 0;      // per-step jumps of the squared quantity above pi/2
  double max_phase_jump = 0.0;  // largest |phi_k - phi_{k-1}|

  int last() const { return static_cast<int>(C.size()) - 1; }
  bool usable() const { return !inapplicable; }
};

/// Continuous argument of a complex series: phi_0 = arg z_0 and every later
/// value differs from the previous one by the principal increment. Counts
/// increments whose size exceeds pi/2 as branch risks.
inline std::vector<double> unwrap_phase(const std::vector<cplx>& z, int* warnings = nullptr) {
  std::vector<double> out;
  out.reserve(z.size());
  int warn = 0;
  double acc = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (k == 0) {
      acc = std::arg(z[0]);
    } else {
      const double d = std::arg(z[k] / z[k - 1]);
      if (std::abs(d) > 0.5 * kPi) ++warn;
      acc += d;
    }
    out.push_back(acc);
  }
  if (warnings) *warnings = warn;
  return out;
}

namespace detail {

/// Continuous square root of a determinant series: log|d|/2 and arg(d)/2.
/// log_d holds complex logarithms; their imaginary parts are unwrapped here.
inline void finish_from_log(const std::vector<cplx>& log_d, PrefactorSeries& out) {
  out.C.clear();
  out.phi.clear();
  out.C.reserve(log_d.size());
  out.phi.reserve(log_d.size());
  double prev = 0.0;
  for (std::size_t k = 0; k < log_d.size(); ++k) {
    // The series ends at the first step it cannot be represented.
    if (!std::isfinite(log_d[k].real()) || !std::isfinite(log_d[k].imag()) ||
        !std::isfinite(std::exp(0.5 * log_d[k].real()))) {
      out.diverged = true;
      break;
    }
    double ang = log_d[k].imag();
    if (k > 0) {
      double d = std::remainder(ang - prev, 2.0 * kPi);
      if (std::abs(d) > 0.5 * kPi) ++out.branch_warnings;
      ang = prev + d;
    }
    prev = ang;
    const double phase = 0.5 * ang;
    const double mag = 0.5 * log_d[k].real();
    if (k > 0) out.max_phase_jump = std::max(out.max_phase_jump, std::abs(kHbar * phase - out.phi.back()));
    out.phi.push_back(kHbar * phase);
    out.C.push_back(std::exp(cplx(mag, phase)));
  }
}

/// Unwraps a sequence of complex logs where only the imaginary part may jump
/// by multiples of 2 pi; used for the determinant factor of the log-derivative form.
inline std::vector<cplx> unwrap_log(const std::vector<cplx>& l) {
  std::vector<cplx> out(l.size());
  double prev = 0.0;
  for (std::size_t k = 0; k < l.size(); ++k) {
    double ang = l[k].imag();
    if (k > 0) ang = prev + std::remainder(ang - prev, 2.0 * kPi);
    prev = ang;
    out[k] = cplx(l[k].real(), ang);
  }
  return out;
}

/// Instantaneous normal modes of K: eigenvalues ascending, eigenvectors as columns.
template <int F>
void normal_modes(const Mat<F>& K, Vec<F>& w2, Mat<F>& U) {
  if constexpr (F == 1) {
    w2[0] = K(0, 0);
    U(0, 0) = 1.0;
  } else {
    Eigen::SelfAdjointEigenSolver<Mat<F>> es;
    es.computeDirect(K);
    w2 = es.eigenvalues();
    U = es.eigenvectors();
  }
}

/// gamma projected on the normal-mode frame: diag(U^T gamma U).
template <int F>
Vec<F> projected_gamma(const Vec<F>& gamma, const Mat<F>& U) {
  return (U.transpose() * gamma.asDiagonal() * U).diagonal();
}

}  // namespace detail

/// C_t = sqrt(det[(Mqq + g^-1 Mpp g + (i/hbar) g^-1 Mpq - i hbar Mqp g) / 2]).
template <int F>
PrefactorSeries prefactor_exact(const std::vector<PhaseMat<F>>& M, const Vec<F>& gamma) {
  PrefactorSeries out;
  std::vector<cplx> logd;
  logd.reserve(M.size());
  const Vec<F> ginv = gamma.cwiseInverse();
  const cplx i(0.0, 1.0);
  for (const auto& m : M) {
    CMat<F> A = (block_qq<F>(m) + ginv.asDiagonal() * block_pp<F>(m) * gamma.asDiagonal())
                    .template cast<cplx>() +
                (i / kHbar) * (ginv.asDiagonal() * block_pq<F>(m)).template cast<cplx>() -
                (i * kHbar) * (block_qp<F>(m) * gamma.asDiagonal()).template cast<cplx>();
    const cplx d = (0.5 * A).determinant();
    if (!(std::abs(d) > 1e-300) || !std::isfinite(std::abs(d))) {
      out.diverged = true;
      break;
    }
    logd.push_back(std::log(d));
  }
  detail::finish_from_log(logd, out);
  return out;
}

/// Same quantity from the auxiliary variables: sqrt(det[Q + (i/hbar) g^-1 P] / 2^F).
template <int F>
PrefactorSeries prefactor_exact_qp(const std::vector<PhaseMat<F>>& M, const Vec<F>& gamma) {
  PrefactorSeries out;
  std::vector<cplx> logd;
  const cplx i(0.0, 1.0);
  const double scale = std::pow(2.0, -F);
  for (const auto& m : M) {
    auto [Q, P] = auxiliary_qp<F>(m, gamma);
    CMat<F> A = Q + (i / kHbar) * gamma.cwiseInverse().template cast<cplx>().asDiagonal() * P;
    const cplx d = A.determinant() * scale;
    if (!(std::abs(d) > 1e-300) || !std::isfinite(std::abs(d))) {
      out.diverged = true;
      break;
    }
    logd.push_back(std::log(d));
  }
  detail::finish_from_log(logd, out);
  return out;
}

/// C_t = sqrt(det[(I + (i/hbar) g^-1 R_t) / 2]) exp(1/2 int Tr R).
/// `trace_integral[k]` is the integral of Tr R up to step k.
template <int F>
PrefactorSeries prefactor_logderivative(const std::vector<CMat<F>>& R,
                                        const std::vector<cplx>& trace_integral,
                                        const Vec<F>& gamma, bool diverged = false) {
  PrefactorSeries out;
  const std::size_t n = std::min(R.size(), trace_integral.size());
  std::vector<cplx> logdet;
  logdet.reserve(n);
  const cplx i(0.0, 1.0);
  const CMat<F> I = CMat<F>::Identity();
  const CMat<F> Gi = gamma.cwiseInverse().template cast<cplx>().asDiagonal();
  for (std::size_t k = 0; k < n; ++k) {
    const cplx d = (0.5 * (I + (i / kHbar) * Gi * R[k])).determinant();
    if (!(std::abs(d) > 1e-300) || !std::isfinite(std::abs(d))) {
      diverged = true;
      break;
    }
    logdet.push_back(std::log(d));
  }
  logdet = detail::unwrap_log(logdet);
  for (std::size_t k = 0; k < logdet.size(); ++k) logdet[k] += trace_integral[k];
  detail::finish_from_log(logdet, out);
  out.diverged = diverged;
  return out;
}

/// Exact log-derivative route from a propagated Riccati series.
template <int F>
PrefactorSeries prefactor_logderivative(const RiccatiSeries<F>& rs, const Vec<F>& gamma) {
  return prefactor_logderivative<F>(rs.R, rs.log_det_q, gamma, rs.diverged);
}

/// Scalar recursion for one mode with h = hbar*gamma and k = omega^2:
///   R1 = -(i/2)(h + k/h),
///   R(n) = R(n-1) + (-1)^n / 2^(2^n - 1) (h - k/h)^(2^(n-1)) / prod_{j=0}^{n-2} R(n-1-j)^(2^j).
/// Every R(m) is purely imaginary, so the recursion runs on r = Im R.
/// `flag` is set when some |R(m)| in a denominator falls below 1e-12; the
/// last good order is then returned.
inline cplx rt_n_scalar(double h, double k, int n, bool* flag = nullptr) {
  std::vector<double> r;
  r.reserve(n);
  r.push_back(-0.5 * (h + k / h));
  const double delta = h - k / h;
  for (int m = 2; m <= n; ++m) {
    // Increment magnitude in log form; the raw powers overflow for large k.
    double logmag = std::pow(2.0, m - 1) * std::log(std::abs(delta)) - (std::pow(2.0, m) - 1.0) * std::log(2.0);
    double sgn = 1.0;
    for (int j = 0; j <= m - 2; ++j) {
      const double x = r[m - 2 - j];
      if (std::abs(x) < 1e-12) {
        if (flag) *flag = true;
        return cplx(0.0, r.back());
      }
      logmag -= std::pow(2.0, j) * std::log(std::abs(x));
      if (j == 0 && x < 0) sgn = -sgn;
    }
    // i^(2^(m-1) - 1) is i for m = 2 and -i beyond.
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    const double inc = delta == 0.0 ? 0.0 : sgn * std::exp(logmag);
    const double next = r.back() + (m == 2 ? -1.0 : 1.0) * sign * inc;
    if (!std::isfinite(next)) {
      if (flag) *flag = true;
      return cplx(0.0, r.back());
    }
    r.push_back(next);
  }
  return cplx(0.0, r.back());
}

/// Analytic log-derivative approximation of order n, evaluated in the
/// instantaneous normal-mode frame of each K_t.
template <int F>
PrefactorSeries prefactor_rt_n(const std::vector<Mat<F>>& K, const Vec<F>& gamma, int n,
                               double dt) {
  if (n < 1) throw ConfigError("prefactor.methods", "R_t^(n) needs n >= 1");
  PrefactorSeries out;
  std::vector<cplx> logs;
  logs.reserve(K.size());
  std::vector<cplx> traces;
  traces.reserve(K.size());
  cplx trace_int = 0.0;
  cplx prev_tr = 0.0;
  Vec<F> w2;
  Mat<F> U;
  std::vector<cplx> held(F, cplx(0.0, 0.0));
  for (std::size_t k = 0; k < K.size(); ++k) {
    detail::normal_modes<F>(K[k], w2, U);
    const Vec<F> gt = detail::projected_gamma<F>(gamma, U);
    cplx tr = 0.0;
    cplx logdet = 0.0;
    for (int j = 0; j < F; ++j) {
      const double h = kHbar * gt[j];
      bool flag = false;
      cplx r = rt_n_scalar(h, w2[j], n, &flag);
      if (flag) {
        ++out.flagged_steps;
        if (k > 0) r = held[j];
      }
      held[j] = r;
      tr += r;
      logdet += std::log(0.5 * (1.0 + cplx(0.0, 1.0) * r / h));
    }
    if (k > 0) trace_int += 0.5 * dt * (prev_tr + tr);
    prev_tr = tr;
    traces.push_back(trace_int);
    logs.push_back(logdet);
  }
  logs = detail::unwrap_log(logs);
  // The determinant factor is referred to t = 0 so that C_0 = 1 even when
  // K_0 differs from (hbar gamma)^2.
  const cplx l0 = logs.empty() ? cplx(0.0) : logs[0];
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k] += traces[k] - l0;
  detail::finish_from_log(logs, out);
  return out;
}

/// C_t = exp(-i sum_j omega_0j t / 2) on the grid t_k = k dt.
inline PrefactorSeries prefactor_harmonic(const std::vector<double>& omega0, int nsteps, double dt) {
  PrefactorSeries out;
  double wsum = 0.0;
  for (double w : omega0) wsum += w;
  out.C.reserve(nsteps + 1);
  out.phi.reserve(nsteps + 1);
  for (int k = 0; k <= nsteps; ++k) {
    const double phi = -0.5 * kHbar * wsum * k * dt;
    out.phi.push_back(phi);
    out.C.push_back(std::polar(1.0, phi / kHbar));
  }
  out.max_phase_jump = 0.5 * kHbar * std::abs(wsum) * dt;
  return out;
}

/// Multichannel WKB: C_t = exp(-(i/hbar) int sum_j (hbar/2) omega_j dt), the
/// omega_j(t)^2 being the eigenvalues of K_t, trapezoid in time.
/// Fail continues a negative eigenvalue to omega = i|omega|, so |C| grows as
/// exp(int |omega|/2); once that no longer fits in a double the series ends
/// and is marked inapplicable. ClampZero drops the mode for the step.
template <int F>
PrefactorSeries prefactor_johnson(const std::vector<Mat<F>>& K, double dt,
                                  JohnsonPolicy policy = JohnsonPolicy::Fail) {
  static const double kLogMax = std::log(std::numeric_limits<double>::max());
  PrefactorSeries out;
  out.C.reserve(K.size());
  out.phi.reserve(K.size());
  Vec<F> w2;
  Mat<F> U;
  double phi = 0.0, logmag = 0.0, prev_re = 0.0, prev_im = 0.0;
  for (std::size_t k = 0; k < K.size(); ++k) {
    detail::normal_modes<F>(K[k], w2, U);
    double re = 0.0, im = 0.0;
    bool imaginary = false;
    for (int j = 0; j < F; ++j) {
      if (w2[j] < 0.0) {
        imaginary = true;
        if (policy == JohnsonPolicy::Fail) im += 0.5 * std::sqrt(-w2[j]);
        continue;
      }
      re += 0.5 * kHbar * std::sqrt(w2[j]);
    }
    if (imaginary) ++out.flagged_steps;
    if (k > 0) {
      const double inc = -0.5 * dt * (prev_re + re);
      phi += inc;
      logmag += 0.5 * dt * (prev_im + im);
      out.max_phase_jump = std::max(out.max_phase_jump, std::abs(inc));
    }
    prev_re = re;
    prev_im = im;
    if (!(logmag < kLogMax)) {
      out.inapplicable = true;
      return out;
    }
    out.phi.push_back(phi);
    out.C.push_back(std::polar(std::exp(logmag), phi / kHbar));
  }
  return out;
}

/// Adiabatic approximation: per normal mode, Q' = P, P' = -omega^2(t) Q with
/// Q_0 = 1, P_0 = -i hbar gamma_j, integrated with the trajectory's own
/// composition and stage Hessians (modes matched by ascending frequency).
/// C_t = sqrt(prod_j (Q_j + i P_j / (hbar gamma_j)) / 2).
template <int F>
PrefactorSeries prefactor_adiabatic(const TrajectoryRecord<F>& traj, const Vec<F>& gamma) {
  if (traj.stage_hessians.size() + 1 < traj.z.size())
    throw ConfigError("prefactor", "adiabatic method needs stage Hessians");
  PrefactorSeries out;
  Vec<F> w2;
  Mat<F> U;
  detail::normal_modes<F>(traj.hessian[0], w2, U);
  const Vec<F> gt = detail::projected_gamma<F>(gamma, U);
  CVec<F> Q = CVec<F>::Ones();
  CVec<F> P;
  for (int j = 0; j < F; ++j) P[j] = cplx(0.0, -kHbar * gt[j]);

  auto log_c2 = [&] {
    cplx l = 0.0;
    for (int j = 0; j < F; ++j)
      l += std::log(0.5 * (Q[j] + cplx(0.0, 1.0) * P[j] / (kHbar * gt[j])));
    return l;
  };
  std::vector<cplx> logs;
  logs.reserve(traj.z.size());
  logs.push_back(log_c2());
  const double dt = traj.dt;
  std::array<Vec<F>, Composition::kKicks> stage_w2;
  for (int k = 0; k < traj.last(); ++k) {
    const auto& st = traj.stage_hessians[k];
    for (int s = 0; s < Composition::kKicks; ++s) detail::normal_modes<F>(st[s], stage_w2[s], U);
    for (int s = 0; s < Composition::kKicks; ++s) {
      P -= (Composition::kick[s] * dt) * stage_w2[s].template cast<cplx>().cwiseProduct(Q);
      if (s < Composition::kDrifts) Q += (Composition::drift[s] * dt) * P;
    }
    if (!Q.allFinite() || !P.allFinite() || Q.cwiseAbs().maxCoeff() > 1e150 ||
        P.cwiseAbs().maxCoeff() > 1e150) {
      out.diverged = true;
      break;
    }
    const cplx l = log_c2();
    if (!std::isfinite(l.real())) {
      out.diverged = true;
      break;
    }
    logs.push_back(l);
  }
  detail::finish_from_log(logs, out);
  return out;
}

/// Poor person's approximation: every ensemble member reuses the exact
/// prefactor of the central trajectory. Inapplicable when that trajectory
/// did not survive the full run.
inline PrefactorSeries prefactor_pps(const PrefactorSeries& central, int nsteps) {
  PrefactorSeries out = central;
  if (central.diverged || central.inapplicable || central.last() < nsteps) {
    out.inapplicable = true;
    out.C.clear();
    out.phi.clear();
  }
  return out;
}

}  // namespace scivr
