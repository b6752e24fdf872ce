#pragma once

// Campaign runner: sampling -> trajectories -> prefactors -> spectra ->
// peaks and MAE, plus file output. One trajectory pass feeds every
// requested prefactor method.

#include "scivr/config.hpp"
#include "scivr/dvr.hpp"
#include "scivr/dynamics.hpp"
#include "scivr/prefactor.hpp"
#include "scivr/spectrum.hpp"
#include "scivr/stability.hpp"

#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace scivr {

struct RunStats {
  long long n = 0;
  long long complete = 0, diverged = 0, monodromy_diverged = 0, escaped = 0, taming_failed = 0;
  long long det_rejected = 0, kay_rejected = 0;  // diagnostic, whatever the active policy
  long long tamed = 0;                           // trajectories regularized at least once
  int max_tamings = 0;
  int max_modes_tamed = 0;

  void merge(const RunStats& o) {
    n += o.n;
    complete += o.complete;
    diverged += o.diverged;
    monodromy_diverged += o.monodromy_diverged;
    escaped += o.escaped;
    taming_failed += o.taming_failed;
    det_rejected += o.det_rejected;
    kay_rejected += o.kay_rejected;
    tamed += o.tamed;
    max_tamings = std::max(max_tamings, o.max_tamings);
    max_modes_tamed = std::max(max_modes_tamed, o.max_modes_tamed);
  }
  double fraction(long long k) const { return n > 0 ? double(k) / double(n) : 0.0; }
};

struct MethodResult {
  PrefactorMethod method;
  std::string key;
  bool inapplicable = false;
  std::string reason;
  SpectrumGrid spectrum;
  std::vector<Peak> peaks;
  MaeReport mae;
  std::optional<double> zpe;
  long long contributing = 0;  // trajectories with at least one time step
  long long rejected = 0;      // cut short by the stability policy
  long long broken = 0;        // the method itself broke down on the trajectory
  long long overflowed = 0;    // series ended because the prefactor overflowed
  long long branch_warnings = 0;
  long long flagged_steps = 0;
  double max_phase_jump = 0.0;
  std::string spectrum_path;
};

struct DvrSummary {
  std::vector<double> energies;
  std::vector<double> overlaps;
  std::vector<double> residuals;
  double refinement_shift = 0.0;
  bool converged = true;
};

struct RunSummary {
  RunConfig config;
  std::vector<double> reference_levels;
  std::optional<DvrSummary> dvr;
  RunStats stats;
  std::vector<MethodResult> methods;
  std::string regularization_outcome;  // empty unless stability.policy = regularize
  double regularization_failed_fraction = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::string> files;

  bool all_inapplicable() const {
    for (const auto& m : methods)
      if (!m.inapplicable) return false;
    return !methods.empty();
  }
  int exit_code() const { return all_inapplicable() ? 3 : 0; }
};

namespace detail {

/// sqrt of the Hessian diagonal at equilibrium: the per-coordinate harmonic
/// frequencies used by the reference-state rules.
inline std::vector<double> coordinate_frequencies(const PesSpec& spec) {
  auto v = evaluate(spec, equilibrium(spec));
  std::vector<double> w;
  for (int i = 0; i < v.hess.rows(); ++i) w.push_back(std::sqrt(std::max(0.0, v.hess(i, i))));
  return w;
}

inline std::string percent(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * f);
  return buf;
}

template <int F>
struct Setup {
  Potential<F> pot;
  CoherentState<F> centre;
  Reference<F> ref;
  std::vector<double> omega0;
  DynamicsOptions dyn;
  bool need_monodromy = false;
  bool need_exact = false;
  PrefactorSeries harmonic;
  PrefactorSeries central;  // exact prefactor of the central trajectory (PPs)
  EnergyAxis axis;

  explicit Setup(const RunConfig& c) : pot(c.pes) {}
};

template <int F>
Setup<F> make_setup(const RunConfig& c) {
  Setup<F> s(c);
  const auto w = coordinate_frequencies(c.pes);
  s.omega0 = harmonic_frequencies(c.pes);
  auto resolve = [&](const VectorRule& r, const char* field) {
    Vec<F> v = Vec<F>::Zero();
    if (r.rule.empty()) {
      for (int j = 0; j < F; ++j) v[j] = r.values[j];
    } else if (r.rule == "equilibrium") {
      v = s.pot.equilibrium();
    } else if (r.rule == "first_harmonic") {
      for (int j = 0; j < F; ++j) v[j] = std::sqrt(3.0 * kHbar * w[j]);
    } else if (r.rule == "harmonic") {
      for (int j = 0; j < F; ++j) v[j] = w[j] / kHbar;
    } else if (r.rule != "zero") {
      throw ConfigError(field, "unknown rule '" + r.rule + "'");
    }
    return v;
  };
  s.centre.q = resolve(c.ref_q, "reference.q");
  s.centre.p = resolve(c.ref_p, "reference.p");
  s.centre.gamma = resolve(c.ref_gamma, "reference.gamma");
  for (int j = 0; j < F; ++j)
    if (!(s.centre.gamma[j] > 0.0))
      throw ConfigError("reference.gamma", "width must be positive (zero harmonic frequency?)");
  s.ref = Reference<F>::single(s.centre);

  using K = PrefactorMethod::Kind;
  bool stage = false;
  for (const auto& m : c.methods) {
    if (m.uses_monodromy()) s.need_monodromy = s.need_exact = true;
    if (m.kind == K::ExactLogDerivative || m.kind == K::Adiabatic) stage = true;
  }
  if (c.stability.kind != StabilityPolicy::Kind::None) s.need_monodromy = s.need_exact = true;
  s.dyn.monodromy = s.need_monodromy;
  s.dyn.stage_hessians = stage;
  s.dyn.escape_radius = c.escape_radius;
  if (c.stability.kind == StabilityPolicy::Kind::Regularize)
    s.dyn.regularization = Regularization{c.stability.eps_thr, c.stability.max_modes, c.stability.taming};

  s.harmonic = prefactor_harmonic(s.omega0, c.nsteps, c.dt);
  for (const auto& m : c.methods)
    if (m.kind == K::PoorPersons) {
      DynamicsOptions o;
      auto tr = propagate(s.pot, PhasePoint<F>{s.centre.q, s.centre.p}, c.dt, c.nsteps, o);
      s.central = prefactor_exact<F>(tr.monodromy, s.centre.gamma);
      if (tr.truncated()) s.central.diverged = true;
    }
  s.axis = EnergyAxis(c.dt, c.nsteps, c.emin, c.emax, c.pad);
  return s;
}

struct MethodAcc {
  std::unique_ptr<TaAccumulator> ta;
  std::unique_ptr<HkAccumulator> hk;
  long long contributing = 0, rejected = 0, broken = 0, branch_warnings = 0, flagged = 0;
  long long overflowed = 0;
  double max_jump = 0.0;

  void merge(const MethodAcc& o) {
    overflowed += o.overflowed;
    if (ta) ta->merge(*o.ta);
    if (hk) hk->merge(*o.hk);
    contributing += o.contributing;
    rejected += o.rejected;
    broken += o.broken;
    branch_warnings += o.branch_warnings;
    flagged += o.flagged;
    max_jump = std::max(max_jump, o.max_jump);
  }
};

struct ChunkAcc {
  RunStats stats;
  std::vector<MethodAcc> m;

  ChunkAcc(const RunConfig& c, const EnergyAxis& ax) : m(c.methods.size()) {
    for (auto& a : m) {
      if (c.estimator == Estimator::TA) a.ta = std::make_unique<TaAccumulator>(ax);
      else a.hk = std::make_unique<HkAccumulator>(ax);
    }
  }
  void merge(const ChunkAcc& o) {
    stats.merge(o.stats);
    for (std::size_t i = 0; i < m.size(); ++i) m[i].merge(o.m[i]);
  }
};

template <int F>
void dump_trajectory(const std::string& path, const TrajectoryRecord<F>& tr) {
  std::ofstream o(path);
  o << "# t";
  for (int j = 0; j < F; ++j) o << " q" << j + 1;
  for (int j = 0; j < F; ++j) o << " p" << j + 1;
  o << " S det(MtM) flags\n# status " << to_string(tr.status) << " tamings " << tr.tamings << "\n";
  char buf[64];
  for (int k = 0; k <= tr.last(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6f", tr.time(k));
    o << buf;
    for (int j = 0; j < F; ++j) o << ' ' << detail::fmt(tr.z[k].q[j]);
    for (int j = 0; j < F; ++j) o << ' ' << detail::fmt(tr.z[k].p[j]);
    o << ' ' << detail::fmt(tr.action[k]) << ' ';
    o << (tr.monodromy.empty() ? std::string("nan") : detail::fmt(1.0 - check_det(tr.monodromy[k])));
    o << ' ' << (k == tr.last() && tr.truncated() ? to_string(tr.status) : "ok") << '\n';
  }
}

template <int F>
void process_trajectory(const Setup<F>& s, const RunConfig& c, long long index, ChunkAcc& acc,
                        FftBackward* fft) {
  using K = PrefactorMethod::Kind;
  const PhasePoint<F> z0 = sample_reference(s.ref, c.seed, static_cast<std::uint64_t>(index), c.sampling_density());
  const auto tr = propagate(s.pot, z0, c.dt, c.nsteps, s.dyn);
  auto& st = acc.stats;
  ++st.n;
  switch (tr.status) {
    case TrajectoryStatus::Complete: ++st.complete; break;
    case TrajectoryStatus::Diverged: ++st.diverged; break;
    case TrajectoryStatus::MonodromyDiverged: ++st.monodromy_diverged; break;
    case TrajectoryStatus::Escaped: ++st.escaped; break;
    case TrajectoryStatus::TamingFailed: ++st.taming_failed; break;
  }
  if (tr.tamings > 0) ++st.tamed;
  st.max_tamings = std::max(st.max_tamings, tr.tamings);
  st.max_modes_tamed = std::max(st.max_modes_tamed, tr.max_modes_tamed);
  if (index < c.dump_trajectories)
    dump_trajectory<F>((std::filesystem::path(c.out_dir) / (c.name + "_traj" + std::to_string(index) + ".dat")).string(), tr);

  const int last = tr.last();
  PrefactorSeries exact;
  std::optional<int> reject;
  if (s.need_exact) {
    exact = prefactor_exact<F>(tr.monodromy, s.centre.gamma);
    StabilityPolicy det{StabilityPolicy::Kind::RejectDet};
    det.det_tol = c.stability.det_tol;
    StabilityPolicy kay{StabilityPolicy::Kind::RejectKay};
    const auto rd = first_rejection(tr, exact, det, c.kay_threshold());
    const auto rk = first_rejection(tr, exact, kay, c.kay_threshold());
    // A prefactor that blew up before the record ended counts as failing
    // both criteria from that point.
    const bool cut = exact.last() < last;
    if (rd || cut) ++st.det_rejected;
    if (rk || cut) ++st.kay_rejected;
    if (c.stability.kind == StabilityPolicy::Kind::RejectDet) reject = rd;
    if (c.stability.kind == StabilityPolicy::Kind::RejectKay) reject = rk;
  }

  const double rho0 = s.ref.density(z0, c.sampling_density());
  const cplx ov0 = s.ref.overlap(z0);
  std::vector<cplx> chi_t(last + 1);
  for (int k = 0; k <= last; ++k) chi_t[k] = s.ref.overlap(tr.z[k]);

  std::optional<RiccatiSeries<F>> riccati;
  std::vector<cplx> f;
  for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
    const auto& m = c.methods[mi];
    auto& ma = acc.m[mi];
    PrefactorSeries local;
    const PrefactorSeries* ps = &local;
    switch (m.kind) {
      case K::ExactMonodromy: ps = &exact; break;
      case K::ExactLogDerivative:
        if (!riccati) riccati = propagate_riccati(tr, s.centre.gamma);
        local = prefactor_logderivative<F>(*riccati, s.centre.gamma);
        break;
      case K::Adiabatic: local = prefactor_adiabatic<F>(tr, s.centre.gamma); break;
      case K::PoorPersons: ps = &s.central; break;
      case K::Harmonic: ps = &s.harmonic; break;
      case K::Johnson: local = prefactor_johnson<F>(tr.hessian, c.dt, c.johnson_policy); break;
      case K::RtN: local = prefactor_rt_n<F>(tr.hessian, s.centre.gamma, m.n, c.dt); break;
    }
    int n = std::min(last, ps->last());
    if (ps->last() < last && m.kind != K::PoorPersons && m.kind != K::Harmonic) ++ma.broken;
    if (ps->inapplicable) ++ma.overflowed;
    if (m.uses_monodromy() && reject) {
      if (*reject - 1 < n) {
        n = *reject - 1;
        ++ma.rejected;
      }
    }
    ma.branch_warnings += ps->branch_warnings;
    ma.flagged += ps->flagged_steps;
    ma.max_jump = std::max(ma.max_jump, ps->max_phase_jump);
    if (n >= 1) ++ma.contributing;
    f.assign(std::max(n + 1, 0), cplx(0.0));
    if (c.estimator == Estimator::TA) {
      for (int k = 0; k <= n; ++k)
        f[k] = std::exp(cplx(0.0, (tr.action[k] + ps->phi[k]) / kHbar)) * chi_t[k];
      ma.ta->add(f, 1.0 / rho0, *fft);
    } else {
      const cplx w = std::conj(ov0) / rho0;
      for (int k = 0; k <= n; ++k)
        f[k] = ps->C[k] * std::exp(cplx(0.0, tr.action[k] / kHbar)) * chi_t[k] * w;
      ma.hk->add(f);
    }
  }
}

template <int F>
RunSummary run_impl(const RunConfig& c, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary sum;
  sum.config = c;
  Setup<F> s = make_setup<F>(c);
  std::filesystem::create_directories(c.out_dir);

  if (!c.levels.empty()) sum.reference_levels = c.levels;
  if (c.dvr_enabled) {
    DvrOptions o;
    o.vectors = true;
    auto res = dvr_solve(c.pes, c.dvr_grid, c.dvr_states, o);
    DvrSummary d;
    d.energies = res.energies;
    d.residuals = res.residuals;
    d.converged = res.converged;
    for (int k = 0; k < res.vectors.cols(); ++k)
      d.overlaps.push_back(overlap_with_reference<F>(res.vectors.col(k), s.ref, c.dvr_grid));
    sum.dvr = d;
    if (sum.reference_levels.empty()) sum.reference_levels = d.energies;
  }

  const int nthreads = threads > 0 ? threads : std::max(1, omp_get_max_threads());
  constexpr long long kChunk = 32;
  const long long nchunks = (c.n_traj + kChunk - 1) / kChunk;
  std::vector<std::unique_ptr<FftBackward>> ffts(nthreads);
  if (c.estimator == Estimator::TA)
    for (auto& p : ffts) p = std::make_unique<FftBackward>(s.axis.length);

  ChunkAcc total(c, s.axis);
  std::vector<std::unique_ptr<ChunkAcc>> wave(nthreads);
  std::exception_ptr err;
  for (long long w0 = 0; w0 < nchunks; w0 += nthreads) {
    const int nw = static_cast<int>(std::min<long long>(nthreads, nchunks - w0));
    for (int i = 0; i < nw; ++i) wave[i] = std::make_unique<ChunkAcc>(c, s.axis);
#pragma omp parallel for num_threads(nthreads) schedule(static, 1)
    for (int i = 0; i < nw; ++i) {
      try {
        const long long lo = (w0 + i) * kChunk;
        const long long hi = std::min<long long>(lo + kChunk, c.n_traj);
        for (long long t = lo; t < hi; ++t)
          process_trajectory<F>(s, c, t, *wave[i], ffts[omp_get_thread_num()].get());
      } catch (...) {
#pragma omp critical
        err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    for (int i = 0; i < nw; ++i) total.merge(*wave[i]);
  }
  sum.stats = total.stats;

  using K = PrefactorMethod::Kind;
  const bool regularize = c.stability.kind == StabilityPolicy::Kind::Regularize;
  // Under det or Kay rejection a monodromy prefactor that breaks down is
  // handled like a rejection: the trajectory contributes up to that step.
  const bool rejecting = c.stability.kind == StabilityPolicy::Kind::RejectDet ||
                         c.stability.kind == StabilityPolicy::Kind::RejectKay;
  if (regularize) {
    // An orbit that runs off to infinity drags its monodromy matrix along;
    // only the escape-radius cut is not a failure of the taming.
    sum.regularization_failed_fraction =
        sum.stats.fraction(sum.stats.diverged + sum.stats.monodromy_diverged + sum.stats.taming_failed);
    sum.regularization_outcome =
        sum.regularization_failed_fraction > c.inapplicable_fraction ? "diverged" : "ok";
  }
  for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
    const auto& ma = total.m[mi];
    MethodResult r;
    r.method = c.methods[mi];
    r.key = to_string(r.method);
    r.contributing = ma.contributing;
    r.rejected = ma.rejected;
    r.broken = ma.broken;
    r.overflowed = ma.overflowed;
    r.branch_warnings = ma.branch_warnings;
    r.flagged_steps = ma.flagged;
    r.max_phase_jump = ma.max_jump;
    const double broken_frac = sum.stats.fraction(ma.broken);
    if (r.method.kind == K::PoorPersons && s.central.last() < c.nsteps) {
      r.inapplicable = true;
      r.reason = "central trajectory diverged";
    } else if (regularize && r.method.uses_monodromy() && sum.regularization_outcome == "diverged") {
      r.inapplicable = true;
      r.reason = "regularization could not keep the monodromy matrix finite in " +
                 percent(sum.regularization_failed_fraction) + " of trajectories";
    } else if (ma.overflowed > 0) {
      // One overflowing exponential is fatal to the method, as it would be
      // to a plain floating-point implementation.
      r.inapplicable = true;
      r.reason = "imaginary instantaneous frequencies overflow the prefactor in " +
                 percent(sum.stats.fraction(ma.overflowed)) + " of trajectories";
    } else if (broken_frac > c.inapplicable_fraction && !(r.method.uses_monodromy() && rejecting)) {
      r.inapplicable = true;
      r.reason = "prefactor diverged in " + percent(broken_frac) + " of trajectories";
    } else if (ma.contributing == 0) {
      r.inapplicable = true;
      r.reason = "all trajectories rejected";
    }
    if (!r.inapplicable) {
      r.spectrum = c.estimator == Estimator::TA ? ma.ta->finish() : ma.hk->finish(c.window);
      r.peaks = find_peaks(r.spectrum, c.peak_min_height, c.peak_min_separation);
      if (!sum.reference_levels.empty())
        r.mae = mae(r.peaks, sum.reference_levels, c.mae_window, c.mae_pairing);
      r.zpe = zero_point(r.peaks, r.mae, sum.reference_levels);
    }
    sum.methods.push_back(std::move(r));
  }
  sum.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sum;
}

}  // namespace detail

/// Runs one experiment. `threads` <= 0 uses the configured count (0 = all).
/// Results do not depend on the thread count.
inline RunSummary run_experiment(const RunConfig& c, int threads = -1) {
  auto issues = validate(c);
  if (!issues.empty()) throw ConfigError(issues.front().field, issues.front().message);
  const int nt = threads > 0 ? threads : c.threads;
  return dispatch_dim(c.dimension(), [&](auto dim) {
    return detail::run_impl<decltype(dim)::value>(c, nt);
  });
}

// ---------------------------------------------------------------- output

inline double energy_out(const RunConfig& c, double e) { return c.units_cm ? e / kCmToHartree : e; }

inline std::string spectrum_text(const RunSummary& s, const MethodResult& m) {
  const auto& c = s.config;
  std::ostringstream o;
  o << "# name " << c.name << "\n# method " << m.key << "\n# estimator " << to_string(c.estimator)
    << "\n# pes " << to_string(c.pes.kind) << "\n# trajectories " << c.n_traj << "\n# seed " << c.seed
    << "\n# dt " << detail::fmt(c.dt) << "\n# steps " << c.nsteps << "\n# stability "
    << to_string(c.stability.kind) << "\n# hartree_per_cm " << detail::fmt(kCmToHartree)
    << "\n# columns E(" << (c.units_cm ? "cm-1" : "hartree") << ") I\n";
  char buf[96];
  for (std::size_t i = 0; i < m.spectrum.E.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10e %.10e\n", energy_out(c, m.spectrum.E[i]), m.spectrum.I[i]);
    o << buf;
  }
  return o.str();
}

inline std::string peaks_text(const RunSummary& s) {
  const auto& c = s.config;
  std::ostringstream o;
  o << "# name " << c.name << "\n# units " << (c.units_cm ? "cm-1" : "hartree")
    << "\n# method E_peak height paired_reference\n";
  char buf[160];
  for (const auto& m : s.methods) {
    if (m.inapplicable) {
      o << "# " << m.key << " inapplicable: " << m.reason << "\n";
      continue;
    }
    for (const auto& p : m.peaks) {
      std::string ref = "-";
      for (const auto& [r, e] : m.mae.pairs)
        if (e == p.E) {
          std::snprintf(buf, sizeof buf, "%.6f", energy_out(c, r));
          ref = buf;
          break;
        }
      std::snprintf(buf, sizeof buf, "%s %.6f %.6e %s\n", m.key.c_str(), energy_out(c, p.E), p.height, ref.c_str());
      o << buf;
    }
    if (m.zpe) {
      std::snprintf(buf, sizeof buf, "# %s ZPE %.6f\n", m.key.c_str(), energy_out(c, *m.zpe));
      o << buf;
    }
    if (m.mae.value) {
      std::snprintf(buf, sizeof buf, "# %s MAE %.6f over %zu paired levels, %zu unpaired\n", m.key.c_str(),
                    energy_out(c, *m.mae.value), m.mae.pairs.size(), m.mae.unpaired.size());
      o << buf;
    }
  }
  return o.str();
}

inline nlohmann::json summary_json(const RunSummary& s) {
  using nlohmann::json;
  const auto& st = s.stats;
  json j;
  j["name"] = s.config.name;
  j["config"] = serialize(s.config);
  j["wall_seconds"] = s.wall_seconds;
  j["trajectories"] = st.n;
  j["status"] = {{"complete", st.complete},         {"diverged", st.diverged},
                 {"monodromy_diverged", st.monodromy_diverged}, {"escaped", st.escaped},
                 {"taming_failed", st.taming_failed}};
  j["rejection"] = {{"det_fraction", st.fraction(st.det_rejected)},
                    {"kay_fraction", st.fraction(st.kay_rejected)},
                    {"det_tol", s.config.stability.det_tol},
                    {"kay_threshold", s.config.kay_threshold()}};
  j["taming"] = {{"tamed_fraction", st.fraction(st.tamed)},
                 {"max_tamings", st.max_tamings},
                 {"max_modes_tamed", st.max_modes_tamed}};
  if (!s.regularization_outcome.empty())
    j["regularization"] = {{"outcome", s.regularization_outcome},
                           {"failed_fraction", s.regularization_failed_fraction}};
  j["reference_levels"] = s.reference_levels;
  if (s.dvr)
    j["dvr"] = {{"energies", s.dvr->energies}, {"overlaps", s.dvr->overlaps},
                {"residuals", s.dvr->residuals}, {"converged", s.dvr->converged}};
  json ms = json::array();
  for (const auto& m : s.methods) {
    json x;
    x["method"] = m.key;
    x["inapplicable"] = m.inapplicable;
    if (m.inapplicable) x["reason"] = m.reason;
    x["contributing"] = m.contributing;
    x["rejected"] = m.rejected;
    x["broken"] = m.broken;
    x["overflowed"] = m.overflowed;
    x["branch_warnings"] = m.branch_warnings;
    x["flagged_steps"] = m.flagged_steps;
    x["max_phase_jump"] = m.max_phase_jump;
    std::vector<double> pe;
    for (const auto& p : m.peaks) pe.push_back(energy_out(s.config, p.E));
    x["peaks"] = pe;
    if (m.zpe) x["zpe"] = energy_out(s.config, *m.zpe);
    else x["zpe"] = nullptr;
    if (m.mae.value) x["mae"] = energy_out(s.config, *m.mae.value);
    else x["mae"] = nullptr;
    x["unpaired_levels"] = m.mae.unpaired.size();
    if (!m.spectrum_path.empty()) x["spectrum"] = m.spectrum_path;
    ms.push_back(x);
  }
  j["methods"] = ms;
  j["exit_code"] = s.exit_code();
  return j;
}

/// Writes spectra, the peak report, the summary and the archived config into
/// config.out_dir. Spectrum files depend only on the config (not on timing
/// or thread count).
inline void write_outputs(RunSummary& s) {
  namespace fs = std::filesystem;
  const auto& c = s.config;
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream o(p, std::ios::binary);
    o << text;
    s.files.push_back(p.string());
  };
  for (auto& m : s.methods) {
    if (m.inapplicable) continue;
    const fs::path p = dir / (c.name + "_" + m.key + ".dat");
    put(p, spectrum_text(s, m));
    m.spectrum_path = p.string();
  }
  put(dir / (c.name + "_peaks.dat"), peaks_text(s));
  put(dir / (c.name + ".config"), serialize(c));
  if (s.dvr) {
    std::ostringstream o;
    o << "# level energy overlap\n";
    char buf[96];
    for (std::size_t k = 0; k < s.dvr->energies.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu %.10f %.6e\n", k, energy_out(c, s.dvr->energies[k]),
                    k < s.dvr->overlaps.size() ? s.dvr->overlaps[k] : 0.0);
      o << buf;
    }
    put(dir / (c.name + "_levels.dat"), o.str());
  }
  put(dir / (c.name + "_summary.json"), summary_json(s).dump(2) + "\n");
}

/// Comparison table: one row per reference level, one column per
/// (config, method), MAE footer. All runs must share potential and reference.
inline std::string compare_methods(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw ConfigError("compare", "no runs given");
  const auto& c0 = runs.front().config;
  for (const auto& r : runs) {
    const auto& c = r.config;
    if (!(c.pes == c0.pes) || !(c.ref_q == c0.ref_q) || !(c.ref_p == c0.ref_p) ||
        !(c.ref_gamma == c0.ref_gamma))
      throw ConfigError("compare", "run '" + c.name + "' uses a different potential or reference state");
    if (r.reference_levels != runs.front().reference_levels)
      throw ConfigError("compare", "run '" + c.name + "' has different reference levels");
    if (r.methods.empty()) throw ConfigError("compare", "run '" + c.name + "' has no methods");
  }
  const auto& refs = runs.front().reference_levels;
  std::vector<std::string> head{"reference"};
  std::vector<const MethodResult*> cols;
  for (const auto& r : runs)
    for (const auto& m : r.methods) {
      head.push_back(runs.size() > 1 ? r.config.name + ":" + m.key : m.key);
      cols.push_back(&m);
    }
  std::ostringstream o;
  o << "#";
  for (const auto& h : head) o << ' ' << h;
  o << '\n';
  char buf[64];
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f", energy_out(c0, refs[i]));
    o << buf;
    for (const auto* m : cols) {
      std::string cell = "-";
      if (!m->inapplicable)
        for (const auto& [r, e] : m->mae.pairs)
          if (r == refs[i]) {
            std::snprintf(buf, sizeof buf, "%.4f", energy_out(c0, e));
            cell = buf;
            break;
          }
      o << ' ' << cell;
    }
    o << '\n';
  }
  o << "MAE";
  for (const auto* m : cols) {
    if (m->inapplicable || !m->mae.value) {
      o << (m->inapplicable ? " n/a" : " -");
    } else {
      std::snprintf(buf, sizeof buf, " %.4f", energy_out(c0, *m->mae.value));
      o << buf;
    }
  }
  o << '\n';
  return o.str();
}

}  // namespace scivr
