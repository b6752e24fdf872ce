#pragma once

// Analytic model potentials in unit-mass, mass-scaled coordinates.

#include "scivr/types.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace scivr {

enum class PesKind { HenonHeiles, MorseQuartic, Harmonic, Morse1D };

inline std::string to_string(PesKind k) {
  switch (k) {
    case PesKind::HenonHeiles:
      return "henon_heiles";
    case PesKind::MorseQuartic:
      return "morse_quartic";
    case PesKind::Harmonic:
      return "harmonic";
    case PesKind::Morse1D:
      return "morse_1d";
  }
  return "?";
}

inline PesKind parse_pes_kind(const std::string& s) {
  if (s == "henon_heiles") return PesKind::HenonHeiles;
  if (s == "morse_quartic") return PesKind::MorseQuartic;
  if (s == "harmonic") return PesKind::Harmonic;
  if (s == "morse_1d") return PesKind::Morse1D;
  throw ConfigError("pes.kind", "unknown potential '" + s + "'");
}

/// Range parameter of a unit-mass Morse oscillator with harmonic frequency
/// omega: 2 D alpha^2 = omega^2.
inline double morse_alpha(double D, double omega) {
  if (!(D > 0.0) || !(omega > 0.0))
    throw ConfigError("morse_alpha requires D > 0 and omega > 0");
  return omega / std::sqrt(2.0 * D);
}

/// Potential kind plus named parameters, all in atomic units.
///
///  - HenonHeiles:  lambda
///  - MorseQuartic: D, omega1, omega2, beta, lambda, q1_eq, q2_eq
///  - Harmonic:     omega1 .. omegaF   (F = number of frequencies)
///  - Morse1D:      D, omega, q_eq
struct PesSpec {
  PesKind kind = PesKind::Harmonic;
  std::map<std::string, double> params;

  double get(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
      throw ConfigError("pes." + key, "missing parameter for " + to_string(kind));
    return it->second;
  }
  double get_or(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  int dimension() const {
    switch (kind) {
      case PesKind::HenonHeiles:
      case PesKind::MorseQuartic:
        return 2;
      case PesKind::Morse1D:
        return 1;
      case PesKind::Harmonic: {
        int f = 0;
        while (params.count("omega" + std::to_string(f + 1))) ++f;
        return f;
      }
    }
    return 0;
  }

  bool operator==(const PesSpec&) const = default;
};

inline PesSpec henon_heiles(double lambda) {
  return {PesKind::HenonHeiles, {{"lambda", lambda}}};
}

inline PesSpec morse_quartic(double D, double omega1, double omega2, double beta,
                             double lambda) {
  return {PesKind::MorseQuartic,
          {{"D", D},
           {"omega1", omega1},
           {"omega2", omega2},
           {"beta", beta},
           {"lambda", lambda},
           {"q1_eq", 0.0},
           {"q2_eq", 0.0}}};
}

inline PesSpec harmonic(const std::vector<double>& omegas) {
  PesSpec s{PesKind::Harmonic, {}};
  for (std::size_t j = 0; j < omegas.size(); ++j)
    s.params["omega" + std::to_string(j + 1)] = omegas[j];
  return s;
}

inline PesSpec morse_1d(double D, double omega) {
  return {PesKind::Morse1D, {{"D", D}, {"omega", omega}, {"q_eq", 0.0}}};
}

template <int F>
struct PesPoint {
  double V = 0.0;
  Vec<F> grad = Vec<F>::Zero();
  Mat<F> hess = Mat<F>::Zero();
};

/// Compiled form of a PesSpec for dimension F: parameters resolved once,
/// evaluation is branch-light and allocation-free.
template <int F>
class Potential {
 public:
  explicit Potential(const PesSpec& spec) : spec_(spec), kind_(spec.kind) {
    if (spec.dimension() != F)
      throw ConfigError("pes", to_string(spec.kind) + " has dimension " +
                                   std::to_string(spec.dimension()) +
                                   ", engine instantiated for " + std::to_string(F));
    switch (kind_) {
      case PesKind::HenonHeiles:
        lambda_ = spec.get("lambda");
        break;
      case PesKind::MorseQuartic:
        D_ = spec.get("D");
        lambda_ = spec.get("lambda");
        beta_ = spec.get("beta");
        for (int i = 0; i < F; ++i) {
          alpha_[i] = morse_alpha(D_, spec.get("omega" + std::to_string(i + 1)));
          eq_[i] = spec.get_or("q" + std::to_string(i + 1) + "_eq", 0.0);
        }
        break;
      case PesKind::Harmonic:
        for (int i = 0; i < F; ++i) {
          double w = spec.get("omega" + std::to_string(i + 1));
          if (!(w >= 0.0)) throw ConfigError("pes.omega", "frequencies must be >= 0");
          w2_[i] = w * w;
        }
        break;
      case PesKind::Morse1D:
        D_ = spec.get("D");
        alpha_[0] = morse_alpha(D_, spec.get("omega"));
        eq_[0] = spec.get_or("q_eq", 0.0);
        break;
    }
  }

  const PesSpec& spec() const { return spec_; }

  PesPoint<F> operator()(const Vec<F>& q) const {
    PesPoint<F> out;
    switch (kind_) {
      case PesKind::HenonHeiles:
        if constexpr (F == 2) henon_heiles(q, out);
        break;
      case PesKind::MorseQuartic:
        if constexpr (F == 2) morse_quartic(q, out);
        break;
      case PesKind::Harmonic:
        for (int i = 0; i < F; ++i) {
          out.V += 0.5 * w2_[i] * q[i] * q[i];
          out.grad[i] = w2_[i] * q[i];
          out.hess(i, i) = w2_[i];
        }
        break;
      case PesKind::Morse1D:
        if constexpr (F == 1) {
          double x = q[0] - eq_[0];
          double u = std::exp(-alpha_[0] * x);
          out.V = D_ * (1.0 - u) * (1.0 - u);
          out.grad[0] = 2.0 * D_ * alpha_[0] * (1.0 - u) * u;
          out.hess(0, 0) = 2.0 * D_ * alpha_[0] * alpha_[0] * (2.0 * u * u - u);
        }
        break;
    }
    return out;
  }

  double value(const Vec<F>& q) const { return (*this)(q).V; }

  Vec<F> equilibrium() const {
    Vec<F> e = Vec<F>::Zero();
    if (kind_ == PesKind::MorseQuartic || kind_ == PesKind::Morse1D)
      for (int i = 0; i < F; ++i) e[i] = eq_[i];
    return e;
  }

 private:
  void henon_heiles(const Vec<F>& q, PesPoint<F>& out) const {
    const double x = q[0], y = q[1], l = lambda_;
    out.V = 0.5 * (x * x + y * y) + l * (x * x * y - y * y * y / 3.0);
    out.grad[0] = x + 2.0 * l * x * y;
    out.grad[1] = y + l * (x * x - y * y);
    out.hess(0, 0) = 1.0 + 2.0 * l * y;
    out.hess(1, 1) = 1.0 - 2.0 * l * y;
    out.hess(0, 1) = out.hess(1, 0) = 2.0 * l * x;
  }

  void morse_quartic(const Vec<F>& q, PesPoint<F>& out) const {
    const double x[2] = {q[0] - eq_[0], q[1] - eq_[1]};
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      const double a = alpha_[i];
      const double u = std::exp(-a * x[i]);
      out.V += D_ * (1.0 - u) * (1.0 - u);
      out.grad[i] = 2.0 * D_ * a * (1.0 - u) * u +
                    lambda_ * (beta_ * x[i] * x[i] * x[i] + 2.0 * x[i] * x[j] * x[j]);
      out.hess(i, i) = 2.0 * D_ * a * a * (2.0 * u * u - u) +
                       lambda_ * (3.0 * beta_ * x[i] * x[i] + 2.0 * x[j] * x[j]);
    }
    const double x2 = x[0] * x[0], y2 = x[1] * x[1];
    out.V += lambda_ * (0.25 * beta_ * (x2 * x2 + y2 * y2) + x2 * y2);
    out.hess(0, 1) = out.hess(1, 0) = 4.0 * lambda_ * x[0] * x[1];
  }

  PesSpec spec_;
  PesKind kind_;
  double lambda_ = 0.0, D_ = 0.0, beta_ = 0.0;
  double alpha_[F > 0 ? F : 1] = {};
  double eq_[F > 0 ? F : 1] = {};
  double w2_[F > 0 ? F : 1] = {};
};

/// Dynamic-size evaluation, for callers that do not know F at compile time.
struct PesValue {
  double V = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

inline PesValue evaluate(const PesSpec& spec, const Eigen::VectorXd& q) {
  if (q.size() != spec.dimension())
    throw ConfigError("pes", "position has dimension " + std::to_string(q.size()) +
                                 ", potential expects " +
                                 std::to_string(spec.dimension()));
  return dispatch_dim(spec.dimension(), [&](auto dim) {
    constexpr int F = decltype(dim)::value;
    Potential<F> pot(spec);
    auto r = pot(Vec<F>(q));
    return PesValue{r.V, Eigen::VectorXd(r.grad), Eigen::MatrixXd(r.hess)};
  });
}

inline Eigen::VectorXd equilibrium(const PesSpec& spec) {
  return dispatch_dim(spec.dimension(), [&](auto dim) {
    constexpr int F = decltype(dim)::value;
    return Eigen::VectorXd(Potential<F>(spec).equilibrium());
  });
}

/// Harmonic frequencies at the declared equilibrium, ascending.
inline std::vector<double> harmonic_frequencies(const PesSpec& spec) {
  auto v = evaluate(spec, equilibrium(spec));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v.hess);
  std::vector<double> w;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    w.push_back(std::sqrt(std::max(0.0, es.eigenvalues()[i])));
  return w;
}

}  // namespace scivr
