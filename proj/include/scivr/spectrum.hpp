#pragma once

// Coherent reference states, Husimi sampling, the Herman-Kluk and
// time-averaged spectrum estimators, peak picking and MAE bookkeeping.

#include "scivr/dynamics.hpp"
#include "scivr/fft.hpp"
#include "scivr/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace scivr {

/// Importance density for phase-space points: |<chi|z>|^2 (Husimi) or the
/// wider |<chi|z>|.
enum class Sampling { Husimi, Modulus };

inline std::string to_string(Sampling s) { return s == Sampling::Husimi ? "husimi" : "modulus"; }
inline Sampling parse_sampling(const std::string& s) {
  if (s == "husimi") return Sampling::Husimi;
  if (s == "modulus") return Sampling::Modulus;
  throw ConfigError("sampling.density", "expected husimi or modulus, got '" + s + "'");
}

template <int F>
struct CoherentState {
  Vec<F> q = Vec<F>::Zero();
  Vec<F> p = Vec<F>::Zero();
  Vec<F> gamma = Vec<F>::Ones();
};

/// <p1 q1 | p2 q2> for equal widths:
///   prod_j exp(-g dq^2/4 - dp^2/(4 g hbar^2) + i (p1+p2)(q1-q2)/(2 hbar)).
template <int F>
cplx coherent_overlap(const CoherentState<F>& chi, const PhasePoint<F>& z) {
  double re = 0.0, im = 0.0;
  for (int j = 0; j < F; ++j) {
    const double g = chi.gamma[j];
    const double dq = chi.q[j] - z.q[j];
    const double dp = chi.p[j] - z.p[j];
    re += -0.25 * g * dq * dq - dp * dp / (4.0 * g * kHbar * kHbar);
    im += (chi.p[j] + z.p[j]) * dq / (2.0 * kHbar);
  }
  return std::exp(cplx(re, im));
}

/// Position representation <x|chi>.
template <int F>
cplx coherent_wavefunction(const CoherentState<F>& chi, const Vec<F>& x) {
  double re = 0.0, im = 0.0, norm = 1.0;
  for (int j = 0; j < F; ++j) {
    const double g = chi.gamma[j];
    const double d = x[j] - chi.q[j];
    norm *= std::pow(g / kPi, 0.25);
    re += -0.5 * g * d * d;
    im += chi.p[j] * d / kHbar;
  }
  return norm * std::exp(cplx(re, im));
}

/// Normalised linear combination sum_i c_i |chi_i>. A single term with c = 1
/// is the plain coherent state.
template <int F>
struct Reference {
  std::vector<cplx> coeff;
  std::vector<CoherentState<F>> states;

  static Reference single(const CoherentState<F>& s) { return {{cplx(1.0)}, {s}}; }

  /// <chi|z>.
  cplx overlap(const PhasePoint<F>& z) const {
    cplx s = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) s += std::conj(coeff[i]) * coherent_overlap(states[i], z);
    return s;
  }

  /// Sampling density times (2 pi hbar)^F, normalised to unit integral: the
  /// mixture of the terms' |<chi_i|z>|^2 (or |<chi_i|z>| / 2^F) weighted by
  /// |c_i|^2 / sum |c|^2.
  double density(const PhasePoint<F>& z, Sampling mode = Sampling::Husimi) const {
    double tot = 0.0, w = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      const double c2 = std::norm(coeff[i]);
      const double a = std::abs(coherent_overlap(states[i], z));
      tot += c2;
      w += c2 * (mode == Sampling::Husimi ? a * a : a);
    }
    return mode == Sampling::Husimi ? w / tot : w / (tot * std::ldexp(1.0, F));
  }

  /// Rescales the coefficients so that <chi|chi> = 1.
  void normalize() {
    cplx n = 0.0;
    for (std::size_t a = 0; a < states.size(); ++a)
      for (std::size_t b = 0; b < states.size(); ++b) {
        PhasePoint<F> zb{states[b].q, states[b].p};
        n += std::conj(coeff[a]) * coeff[b] * coherent_overlap(states[a], zb);
      }
    const double s = 1.0 / std::sqrt(n.real());
    for (auto& c : coeff) c *= s;
  }
};

/// Independent generator per trajectory index, decoupled from worker count.
inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// One draw from |<z|chi>|^2: q ~ N(q_c, 1/gamma), p ~ N(p_c, gamma hbar^2).
/// Modulus sampling doubles both variances.
template <int F>
PhasePoint<F> sample_husimi_one(const CoherentState<F>& chi, std::mt19937_64& rng,
                                Sampling mode = Sampling::Husimi) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double s = mode == Sampling::Husimi ? 1.0 : std::sqrt(2.0);
  PhasePoint<F> z;
  for (int j = 0; j < F; ++j) {
    z.q[j] = chi.q[j] + s * n01(rng) / std::sqrt(chi.gamma[j]);
    z.p[j] = chi.p[j] + s * n01(rng) * kHbar * std::sqrt(chi.gamma[j]);
  }
  return z;
}

/// Draw for trajectory `index` from the reference's sampling density.
template <int F>
PhasePoint<F> sample_reference(const Reference<F>& ref, std::uint64_t seed, std::uint64_t index,
                               Sampling mode = Sampling::Husimi) {
  auto rng = trajectory_rng(seed, index);
  std::size_t term = 0;
  if (ref.states.size() > 1) {
    std::vector<double> w;
    for (auto c : ref.coeff) w.push_back(std::norm(c));
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    term = pick(rng);
  }
  return sample_husimi_one(ref.states[term], rng, mode);
}

template <int F>
std::vector<PhasePoint<F>> sample_husimi(const CoherentState<F>& chi, int n, std::uint64_t seed) {
  if (n <= 0) throw ConfigError("sampling.n", "sample count must be positive");
  std::vector<PhasePoint<F>> out;
  out.reserve(n);
  auto ref = Reference<F>::single(chi);
  for (int i = 0; i < n; ++i) out.push_back(sample_reference(ref, seed, static_cast<std::uint64_t>(i)));
  return out;
}

struct SpectrumGrid {
  std::vector<double> E;
  std::vector<double> I;
  std::map<std::string, std::string> meta;

  bool empty() const { return E.empty(); }
  double spacing() const { return E.size() > 1 ? E[1] - E[0] : 0.0; }
};

/// Energy axis shared by both estimators: E_m = 2 pi m / (L dt) restricted
/// to [emin, emax], with L >= pad * (nsteps + 1) an FFT-friendly length.
struct EnergyAxis {
  double dt = 0.0;
  int nsteps = 0;
  int length = 0;
  int m_lo = 0, m_hi = 0;  // inclusive index range kept

  EnergyAxis() = default;
  EnergyAxis(double dt_, int nsteps_, double emin, double emax, int pad = 4)
      : dt(dt_), nsteps(nsteps_) {
    if (pad < 4) throw ConfigError("spectrum.pad", "zero-padding factor must be >= 4");
    length = fft_friendly_size(pad * (nsteps + 1));
    const double dE = 2.0 * kPi / (length * dt);
    m_lo = std::max(0, static_cast<int>(std::ceil(emin / dE)));
    m_hi = std::min(length / 2, static_cast<int>(std::floor(emax / dE)));
    if (m_hi < m_lo) throw ConfigError("spectrum.emax", "empty energy window");
  }
  double spacing() const { return 2.0 * kPi / (length * dt); }
  int size() const { return m_hi - m_lo + 1; }
  double energy(int i) const { return (m_lo + i) * spacing(); }
};

/// Time-averaged estimator. For each trajectory with integrand
/// f_k = exp(i(S_k + phi_k)/hbar) <chi|z_k>, k = 0..n, adds
///   weight |dt sum_k w_k f_k e^{i E t_k}|^2 / (2 pi hbar T)
/// with trapezoid weights w_k and T = nsteps dt.
class TaAccumulator {
 public:
  explicit TaAccumulator(const EnergyAxis& ax) : ax_(ax), sum_(ax.size(), 0.0) {}

  void add(const std::vector<cplx>& f, double weight, FftBackward& fft) {
    const int n = static_cast<int>(f.size()) - 1;
    ++count_;
    if (n < 1 || weight == 0.0) return;
    cplx* in = fft.input();
    std::fill(in, in + fft.size(), cplx(0.0));
    for (int k = 0; k <= n; ++k) in[k] = (k == 0 || k == n ? 0.5 : 1.0) * f[k];
    fft.execute();
    const cplx* out = fft.output();
    const double T = ax_.nsteps * ax_.dt;
    const double scale = weight * ax_.dt * ax_.dt / (2.0 * kPi * kHbar * T);
    for (int i = 0; i < ax_.size(); ++i) sum_[i] += scale * std::norm(out[ax_.m_lo + i]);
  }

  void merge(const TaAccumulator& o) {
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += o.sum_[i];
    count_ += o.count_;
  }

  long long count() const { return count_; }

  /// Ensemble average over all trajectories offered (including empty ones).
  SpectrumGrid finish() const {
    SpectrumGrid g;
    for (int i = 0; i < ax_.size(); ++i) {
      g.E.push_back(ax_.energy(i));
      g.I.push_back(count_ > 0 ? sum_[i] / static_cast<double>(count_) : 0.0);
    }
    return g;
  }

 private:
  EnergyAxis ax_;
  std::vector<double> sum_;
  long long count_ = 0;
};

enum class Window { Hann, None };

inline std::string to_string(Window w) { return w == Window::Hann ? "hann" : "none"; }
inline Window parse_window(const std::string& s) {
  if (s == "hann") return Window::Hann;
  if (s == "none") return Window::None;
  throw ConfigError("spectrum.window", "expected hann or none, got '" + s + "'");
}

/// Herman-Kluk estimator of the survival amplitude A(t_k); each trajectory
/// adds its integrand up to its last valid step.
class HkAccumulator {
 public:
  explicit HkAccumulator(const EnergyAxis& ax) : ax_(ax), A_(ax.nsteps + 1, cplx(0.0)) {}

  void add(const std::vector<cplx>& g) {
    ++count_;
    const std::size_t n = std::min(g.size(), A_.size());
    for (std::size_t k = 0; k < n; ++k) A_[k] += g[k];
  }

  void merge(const HkAccumulator& o) {
    for (std::size_t k = 0; k < A_.size(); ++k) A_[k] += o.A_[k];
    count_ += o.count_;
  }

  long long count() const { return count_; }

  std::vector<cplx> amplitude() const {
    std::vector<cplx> a(A_.size());
    for (std::size_t k = 0; k < A_.size(); ++k) a[k] = count_ > 0 ? A_[k] / double(count_) : 0.0;
    return a;
  }

  /// I(E) = (1/2 pi hbar) dt [2 Re sum_k A_k w_k e^{i E t_k} - A_0], with A
  /// extended to negative times by A(-t) = A(t)^*.
  SpectrumGrid finish(Window window = Window::Hann) const {
    return spectrum_from_amplitude(amplitude(), ax_, window);
  }

  static SpectrumGrid spectrum_from_amplitude(const std::vector<cplx>& A, const EnergyAxis& ax,
                                              Window window) {
    FftBackward fft(ax.length);
    cplx* in = fft.input();
    std::fill(in, in + fft.size(), cplx(0.0));
    const double T = ax.nsteps * ax.dt;
    for (std::size_t k = 0; k < A.size(); ++k) {
      double w = 1.0;
      if (window == Window::Hann && T > 0) {
        const double c = std::cos(kPi * k * ax.dt / (2.0 * T));
        w = c * c;
      }
      in[k] = A[k] * w;
    }
    const cplx a0 = in[0];
    fft.execute();
    SpectrumGrid g;
    for (int i = 0; i < ax.size(); ++i) {
      g.E.push_back(ax.energy(i));
      const cplx s = fft.output()[ax.m_lo + i];
      g.I.push_back(ax.dt * (2.0 * s.real() - a0.real()) / (2.0 * kPi * kHbar));
    }
    return g;
  }

 private:
  EnergyAxis ax_;
  std::vector<cplx> A_;
  long long count_ = 0;
};

struct Peak {
  double E = 0.0;
  double height = 0.0;
};

/// Local maxima above min_height_fraction * max(I), refined by a parabola
/// through the three grid points; peaks closer than min_separation are
/// merged into the taller one. Result sorted by energy.
inline std::vector<Peak> find_peaks(const std::vector<double>& E, const std::vector<double>& I,
                                    double min_height_fraction, double min_separation) {
  std::vector<Peak> cand;
  if (E.size() < 3 || E.size() != I.size()) return cand;
  const double top = *std::max_element(I.begin(), I.end());
  if (!(top > 0.0)) return cand;
  const double floor = min_height_fraction * top;
  for (std::size_t i = 1; i + 1 < I.size(); ++i) {
    if (!(I[i] > I[i - 1] && I[i] >= I[i + 1]) || I[i] < floor) continue;
    const double y0 = I[i - 1], y1 = I[i], y2 = I[i + 1];
    const double den = y0 - 2.0 * y1 + y2;
    double off = 0.0, h = y1;
    if (den < 0.0) {
      off = 0.5 * (y0 - y2) / den;
      h = y1 - 0.25 * (y0 - y2) * off;
    }
    cand.push_back({E[i] + off * (E[i + 1] - E[i]), h});
  }
  std::sort(cand.begin(), cand.end(), [](const Peak& a, const Peak& b) { return a.height > b.height; });
  std::vector<Peak> kept;
  for (const auto& c : cand) {
    bool close = false;
    for (const auto& k : kept)
      if (std::abs(k.E - c.E) < min_separation) close = true;
    if (!close) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) { return a.E < b.E; });
  return kept;
}

inline std::vector<Peak> find_peaks(const SpectrumGrid& g, double min_height_fraction,
                                    double min_separation) {
  return find_peaks(g.E, g.I, min_height_fraction, min_separation);
}

struct MaeReport {
  std::optional<double> value;  // empty when nothing paired
  std::vector<std::pair<double, double>> pairs;  // (reference, peak)
  std::vector<double> unpaired;
};

/// How reference levels are matched to detected peaks.
///   nearest    closest peak within the window; degenerate levels may share it
///   tallest    most intense peak within the window (ties: the closer one)
///   exclusive  nearest, greedily by distance, each peak used at most once
enum class Pairing { Nearest, Tallest, Exclusive };

inline std::string to_string(Pairing p) {
  switch (p) {
    case Pairing::Nearest: return "nearest";
    case Pairing::Tallest: return "tallest";
    case Pairing::Exclusive: return "exclusive";
  }
  return "?";
}
inline Pairing parse_pairing(const std::string& s) {
  if (s == "nearest") return Pairing::Nearest;
  if (s == "tallest") return Pairing::Tallest;
  if (s == "exclusive") return Pairing::Exclusive;
  throw ConfigError("mae.pairing", "expected nearest, tallest or exclusive, got '" + s + "'");
}

inline MaeReport mae(const std::vector<Peak>& peaks, const std::vector<double>& refs, double window,
                     Pairing mode = Pairing::Nearest) {
  MaeReport r;
  std::vector<std::optional<double>> match(refs.size());
  if (mode != Pairing::Exclusive) {
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const Peak* best = nullptr;
      for (const auto& p : peaks) {
        const double d = std::abs(p.E - refs[i]);
        if (d > window) continue;
        if (!best) { best = &p; continue; }
        const double db = std::abs(best->E - refs[i]);
        const bool better = mode == Pairing::Nearest
                                ? d < db
                                : (p.height > best->height || (p.height == best->height && d < db));
        if (better) best = &p;
      }
      if (best) match[i] = best->E;
    }
  } else {
    struct Cand { double d; std::size_t i, j; };
    std::vector<Cand> c;
    for (std::size_t i = 0; i < refs.size(); ++i)
      for (std::size_t j = 0; j < peaks.size(); ++j)
        if (std::abs(peaks[j].E - refs[i]) <= window) c.push_back({std::abs(peaks[j].E - refs[i]), i, j});
    std::stable_sort(c.begin(), c.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
    std::vector<bool> used(peaks.size(), false);
    for (const auto& x : c)
      if (!match[x.i] && !used[x.j]) {
        match[x.i] = peaks[x.j].E;
        used[x.j] = true;
      }
  }
  double s = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (match[i]) {
      r.pairs.emplace_back(refs[i], *match[i]);
      s += std::abs(*match[i] - refs[i]);
    } else {
      r.unpaired.push_back(refs[i]);
    }
  }
  if (!r.pairs.empty()) r.value = s / static_cast<double>(r.pairs.size());
  return r;
}

/// Bare energies, all of equal height.
inline MaeReport mae(const std::vector<double>& energies, const std::vector<double>& refs, double window,
                     Pairing mode = Pairing::Nearest) {
  std::vector<Peak> p;
  for (double e : energies) p.push_back(Peak{e, 1.0});
  return mae(p, refs, window, mode);
}

/// Zero-point estimate: the peak paired with the lowest reference level,
/// or the lowest peak when there are no references.
inline std::optional<double> zero_point(const std::vector<Peak>& peaks, const MaeReport& r,
                                        const std::vector<double>& refs) {
  if (refs.empty()) {
    if (peaks.empty()) return std::nullopt;
    return peaks.front().E;
  }
  const double lo = *std::min_element(refs.begin(), refs.end());
  for (const auto& [ref, e] : r.pairs)
    if (ref == lo) return e;
  return std::nullopt;
}

inline std::vector<double> peak_energies(const std::vector<Peak>& p) {
  std::vector<double> e;
  for (const auto& x : p) e.push_back(x.E);
  return e;
}

}  // namespace scivr
