#pragma once

// Classical trajectories with action, monodromy matrix and (optionally) the
// Hessians seen at every force stage, plus the log-derivative propagation
// that replays those stages.

#include "scivr/pes.hpp"
#include "scivr/stability.hpp"
#include "scivr/types.hpp"

#include <array>
#include <limits>
#include <optional>
#include <vector>

namespace scivr {

/// Fourth-order symmetric kick-drift composition (Blanes & Moan, SRKN6b).
/// Seven kicks, six drifts; the last kick of a step shares its force
/// evaluation with the first kick of the next.
struct Composition {
  static constexpr int kKicks = 7;
  static constexpr int kDrifts = 6;
  static constexpr double a1 = 0.245298957184271;
  static constexpr double a2 = 0.604872665711080;
  static constexpr double a3 = 0.5 - (a1 + a2);
  static constexpr double b1 = 0.0829844064174052;
  static constexpr double b2 = 0.396309801498368;
  static constexpr double b3 = -0.0390563049223486;
  static constexpr double b4 = 1.0 - 2.0 * (b1 + b2 + b3);
  static constexpr std::array<double, kKicks> kick{b1, b2, b3, b4, b3, b2, b1};
  static constexpr std::array<double, kDrifts> drift{a1, a2, a3, a3, a2, a1};
};

template <int F>
struct PhasePoint {
  Vec<F> q = Vec<F>::Zero();
  Vec<F> p = Vec<F>::Zero();
};

template <int F>
double energy(const Potential<F>& pot, const PhasePoint<F>& z) {
  return 0.5 * z.p.squaredNorm() + pot.value(z.q);
}

/// Monodromy blocks. M is ordered (p, q) x (p0, q0).
template <int F>
auto block_pp(const PhaseMat<F>& M) { return M.template topLeftCorner<F, F>(); }
template <int F>
auto block_pq(const PhaseMat<F>& M) { return M.template topRightCorner<F, F>(); }
template <int F>
auto block_qp(const PhaseMat<F>& M) { return M.template bottomLeftCorner<F, F>(); }
template <int F>
auto block_qq(const PhaseMat<F>& M) { return M.template bottomRightCorner<F, F>(); }

/// Trapezoidal increment of the classical action over one step,
/// integrand |p|^2/2 - V.
template <int F>
double action_increment(const Vec<F>& p0, double V0, const Vec<F>& p1, double V1,
                        double dt) {
  return 0.5 * dt * ((0.5 * p0.squaredNorm() - V0) + (0.5 * p1.squaredNorm() - V1));
}

enum class TrajectoryStatus { Complete, Diverged, MonodromyDiverged, Escaped, TamingFailed };

inline std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::Complete:
      return "complete";
    case TrajectoryStatus::Diverged:
      return "diverged";
    case TrajectoryStatus::MonodromyDiverged:
      return "monodromy_diverged";
    case TrajectoryStatus::Escaped:
      return "escaped";
    case TrajectoryStatus::TamingFailed:
      return "taming_failed";
  }
  return "?";
}

struct Regularization {
  double eps_thr = 1.15e3;
  int max_modes = 2;
  TamingMode mode = TamingMode::Both;
};

struct DynamicsOptions {
  bool monodromy = true;
  bool stage_hessians = false;
  /// Positions with any |q_i - q_eq,i| beyond this end the trajectory (Escaped).
  double escape_radius = std::numeric_limits<double>::infinity();
  /// Any state or monodromy entry above this (or non-finite) ends it (Diverged).
  double divergence_threshold = 1e300;
  std::optional<Regularization> regularization;
};

/// Per-step record of one trajectory. Index k holds time k*dt; the record
/// may stop short of nsteps when the trajectory diverged or escaped.
template <int F>
struct TrajectoryRecord {
  double dt = 0.0;
  int nsteps = 0;
  std::vector<PhasePoint<F>> z;
  std::vector<double> action;
  std::vector<double> potential;
  std::vector<Mat<F>> hessian;
  std::vector<PhaseMat<F>> monodromy;
  /// stage_hessians[k][s]: Hessian used by kick s while stepping k -> k+1.
  std::vector<std::array<Mat<F>, Composition::kKicks>> stage_hessians;
  TrajectoryStatus status = TrajectoryStatus::Complete;
  int tamings = 0;
  int max_modes_tamed = 0;

  int last() const { return static_cast<int>(z.size()) - 1; }
  double time(int k) const { return k * dt; }
  bool truncated() const { return last() < nsteps; }
};

template <int F>
TrajectoryRecord<F> propagate(const Potential<F>& pot, const PhasePoint<F>& z0, double dt,
                              int nsteps, const DynamicsOptions& opts = {}) {
  if (!(dt > 0.0)) throw ConfigError("dynamics.dt", "time step must be positive");
  if (nsteps < 0) throw ConfigError("dynamics.steps", "step count must be >= 0");
  if (!z0.q.allFinite() || !z0.p.allFinite())
    throw ConfigError("dynamics", "initial phase point is not finite");

  TrajectoryRecord<F> rec;
  rec.dt = dt;
  rec.nsteps = nsteps;
  rec.z.reserve(nsteps + 1);
  rec.action.reserve(nsteps + 1);
  rec.potential.reserve(nsteps + 1);
  rec.hessian.reserve(nsteps + 1);
  if (opts.monodromy) rec.monodromy.reserve(nsteps + 1);
  if (opts.stage_hessians) rec.stage_hessians.reserve(nsteps);

  const Vec<F> centre = pot.equilibrium();
  PhasePoint<F> z = z0;
  PhaseMat<F> M = PhaseMat<F>::Identity();
  auto pt = pot(z.q);
  double S = 0.0;

  auto push = [&] {
    rec.z.push_back(z);
    rec.action.push_back(S);
    rec.potential.push_back(pt.V);
    rec.hessian.push_back(pt.hess);
    if (opts.monodromy) rec.monodromy.push_back(M);
  };
  push();

  std::array<Mat<F>, Composition::kKicks> stages;
  for (int k = 0; k < nsteps; ++k) {
    const Vec<F> p_start = z.p;
    const double V_start = pt.V;
    PhasePoint<F> zn = z;
    PhaseMat<F> Mn = M;
    PesPoint<F> ptn = pt;
    for (int s = 0; s < Composition::kKicks; ++s) {
      const double bh = Composition::kick[s] * dt;
      zn.p -= bh * ptn.grad;
      if (opts.monodromy) Mn.template topRows<F>() -= bh * ptn.hess * Mn.template bottomRows<F>();
      stages[s] = ptn.hess;
      if (s < Composition::kDrifts) {
        const double ah = Composition::drift[s] * dt;
        zn.q += ah * zn.p;
        if (opts.monodromy) Mn.template bottomRows<F>() += ah * Mn.template topRows<F>();
        ptn = pot(zn.q);
      }
    }

    const double thr = opts.divergence_threshold;
    if (!zn.q.allFinite() || !zn.p.allFinite() || !std::isfinite(ptn.V) ||
        !ptn.hess.allFinite() || zn.q.cwiseAbs().maxCoeff() > thr ||
        zn.p.cwiseAbs().maxCoeff() > thr) {
      rec.status = TrajectoryStatus::Diverged;
      break;
    }
    if (opts.monodromy && (!Mn.allFinite() || Mn.cwiseAbs().maxCoeff() > thr)) {
      rec.status = TrajectoryStatus::MonodromyDiverged;
      break;
    }
    if ((zn.q - centre).cwiseAbs().maxCoeff() > opts.escape_radius) {
      rec.status = TrajectoryStatus::Escaped;
      break;
    }
    if (opts.monodromy && opts.regularization) {
      const auto& reg = *opts.regularization;
      auto tamed = regularize<2 * F>(Mn, reg.eps_thr, reg.max_modes, reg.mode);
      if (!tamed.ok) {
        rec.status = TrajectoryStatus::TamingFailed;
        break;
      }
      if (tamed.tamed > 0) {
        Mn = tamed.M;
        ++rec.tamings;
        rec.max_modes_tamed = std::max(rec.max_modes_tamed, tamed.tamed);
      }
    }

    const double dS = action_increment<F>(p_start, V_start, zn.p, ptn.V, dt);
    if (!std::isfinite(S + dS)) {
      rec.status = TrajectoryStatus::Diverged;
      break;
    }
    S += dS;
    z = zn;
    M = Mn;
    pt = ptn;
    if (opts.stage_hessians) rec.stage_hessians.push_back(stages);
    push();
  }
  return rec;
}

/// Auxiliary variables Q = Mqq - i hbar Mqp gamma, P = Mpq - i hbar Mpp gamma.
template <int F>
std::pair<CMat<F>, CMat<F>> auxiliary_qp(const PhaseMat<F>& M, const Vec<F>& gamma) {
  const cplx ih(0.0, kHbar);
  CMat<F> Q = block_qq<F>(M).template cast<cplx>() -
              ih * (block_qp<F>(M) * gamma.asDiagonal()).template cast<cplx>();
  CMat<F> P = block_pq<F>(M).template cast<cplx>() -
              ih * (block_pp<F>(M) * gamma.asDiagonal()).template cast<cplx>();
  return {Q, P};
}

/// Log-derivative matrix R = P Q^-1 and the accumulated log det Q, which
/// equals the time integral of Tr R.
template <int F>
struct RiccatiSeries {
  std::vector<CMat<F>> R;
  std::vector<cplx> log_det_q;
  bool diverged = false;

  int last() const { return static_cast<int>(R.size()) - 1; }
};

/// Replays the force stages of `traj` on the Riccati equation
/// dR/dt = -K - R^2 with the two-stage scheme
///   X = R - b K dt,   R <- (I + a X dt)^-1 X,
/// using the same kick/drift coefficients as the trajectory. Because each
/// substep is the exact image of the linearised flow, log det Q advances by
/// log det(I + a X dt) per drift.
template <int F>
RiccatiSeries<F> propagate_riccati(const TrajectoryRecord<F>& traj, const Vec<F>& gamma) {
  if (traj.stage_hessians.size() + 1 < traj.z.size())
    throw ConfigError("dynamics", "log-derivative propagation needs stage Hessians");
  RiccatiSeries<F> out;
  const int n = traj.last();
  out.R.reserve(n + 1);
  out.log_det_q.reserve(n + 1);

  CMat<F> R = (cplx(0.0, -kHbar) * gamma.template cast<cplx>()).asDiagonal();
  cplx logdet = 0.0;
  out.R.push_back(R);
  out.log_det_q.push_back(logdet);
  const CMat<F> I = CMat<F>::Identity();
  const double dt = traj.dt;

  for (int k = 0; k < n; ++k) {
    const auto& stages = traj.stage_hessians[k];
    for (int s = 0; s < Composition::kKicks; ++s) {
      CMat<F> X = R - (Composition::kick[s] * dt) * stages[s].template cast<cplx>();
      if (s < Composition::kDrifts) {
        CMat<F> A = I + (Composition::drift[s] * dt) * X;
        const cplx d = A.determinant();
        if (!(std::abs(d) > 1e-300) || !std::isfinite(std::abs(d))) {
          out.diverged = true;
          return out;
        }
        logdet += std::log(d);
        R = A.partialPivLu().solve(X);
      } else {
        R = X;
      }
    }
    if (!R.allFinite() || R.cwiseAbs().maxCoeff() > 1e300 || !std::isfinite(logdet.real())) {
      out.diverged = true;
      return out;
    }
    out.R.push_back(R);
    out.log_det_q.push_back(logdet);
  }
  return out;
}

}  // namespace scivr
