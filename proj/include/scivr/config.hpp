#pragma once

// RunConfig: flat "section.key = value" text, '#' starts a comment.
// Lists are comma separated. Unknown keys are errors.

#include "scivr/dvr.hpp"
#include "scivr/pes.hpp"
#include "scivr/prefactor.hpp"
#include "scivr/spectrum.hpp"
#include "scivr/stability.hpp"
#include "scivr/types.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace scivr {

enum class Estimator { TA, HK };

inline std::string to_string(Estimator e) { return e == Estimator::TA ? "ta" : "hk"; }
inline Estimator parse_estimator(const std::string& s) {
  if (s == "ta") return Estimator::TA;
  if (s == "hk") return Estimator::HK;
  throw ConfigError("estimator", "expected ta or hk, got '" + s + "'");
}

/// A vector given explicitly or by a named rule.
struct VectorRule {
  std::string rule;        // "" when explicit
  std::vector<double> values;

  bool operator==(const VectorRule&) const = default;
};

struct RunConfig {
  std::string name = "run";
  PesSpec pes;
  VectorRule ref_q{"equilibrium", {}};
  VectorRule ref_p{"first_harmonic", {}};
  VectorRule ref_gamma{"harmonic", {}};
  int n_traj = 1000;
  std::uint64_t seed = 1;
  std::optional<Sampling> sampling;  // unset: modulus for hk, husimi for ta
  double dt = 0.1;
  int nsteps = 1000;
  double escape_radius = std::numeric_limits<double>::infinity();
  Estimator estimator = Estimator::TA;
  std::vector<PrefactorMethod> methods{{PrefactorMethod::Kind::ExactMonodromy, 1}};
  JohnsonPolicy johnson_policy = JohnsonPolicy::Fail;
  StabilityPolicy stability;
  double emin = 0.0;
  double emax = 10.0;
  int pad = 4;
  Window window = Window::Hann;
  double peak_min_height = 0.01;
  double peak_min_separation = 0.02;
  double mae_window = 0.1;
  Pairing mae_pairing = Pairing::Nearest;
  std::vector<double> levels;  // explicit reference levels (a.u.)
  bool dvr_enabled = false;
  DvrGrid dvr_grid;
  int dvr_states = 10;
  int threads = 0;
  double inapplicable_fraction = 0.5;
  std::string out_dir = "out";
  bool units_cm = false;
  int dump_trajectories = 0;

  bool operator==(const RunConfig&) const = default;

  int dimension() const { return pes.dimension(); }
  Sampling sampling_density() const {
    if (sampling) return *sampling;
    return estimator == Estimator::HK ? Sampling::Modulus : Sampling::Husimi;
  }
  double kay_threshold() const {
    return stability.kay_threshold > 0 ? stability.kay_threshold : static_cast<double>(n_traj);
  }
};

struct ConfigIssue {
  std::string field;
  std::string message;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

inline VectorRule to_rule(const std::string& key, const std::string& v,
                          std::initializer_list<const char*> rules) {
  for (const char* r : rules)
    if (v == r) return {r, {}};
  return {"", to_doubles(key, v)};
}

inline std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

inline std::string fmt(const VectorRule& r) { return r.rule.empty() ? fmt(r.values) : r.rule; }

inline StabilityPolicy::Kind parse_policy_kind(const std::string& v) {
  if (v == "none") return StabilityPolicy::Kind::None;
  if (v == "det") return StabilityPolicy::Kind::RejectDet;
  if (v == "kay") return StabilityPolicy::Kind::RejectKay;
  if (v == "regularize") return StabilityPolicy::Kind::Regularize;
  throw ConfigError("stability.policy", "expected none, det, kay or regularize, got '" + v + "'");
}

inline TamingMode parse_taming(const std::string& v) {
  if (v == "both") return TamingMode::Both;
  if (v == "eigenvalue") return TamingMode::EigenvalueOnly;
  if (v == "eigenvector") return TamingMode::EigenvectorOnly;
  throw ConfigError("stability.taming", "expected both, eigenvalue or eigenvector, got '" + v + "'");
}

inline DvrAxis to_axis(const std::string& key, const std::string& v) {
  auto d = to_doubles(key, v);
  if (d.size() != 3) throw ConfigError(key, "expected 'a, b, n'");
  if (d[2] != std::floor(d[2])) throw ConfigError(key, "point count must be an integer");
  return {d[0], d[1], static_cast<int>(d[2])};
}

}  // namespace detail

/// Applies one key. Throws ConfigError naming the key on bad input.
/// Energy-valued keys also accept a "_cm" suffix (values in cm^-1).
inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key.size() > 3 && key.compare(key.size() - 3, 3, "_cm") == 0) {
    const std::string base = key.substr(0, key.size() - 3);
    static const char* energy_keys[] = {"spectrum.emin", "spectrum.emax", "peaks.min_separation",
                                        "mae.window", "levels"};
    bool ok = base.rfind("pes.", 0) == 0 && base != "pes.kind";
    for (const char* k : energy_keys) ok = ok || base == k;
    if (!ok) throw ConfigError(key, "unknown key");
    auto vals = to_doubles(key, v);
    for (auto& x : vals) x *= kCmToHartree;
    apply_config_key(c, base, fmt(vals));
    return;
  }
  if (key == "name") c.name = v;
  else if (key == "pes.kind") c.pes.kind = parse_pes_kind(v);
  else if (key.rfind("pes.", 0) == 0) c.pes.params[key.substr(4)] = to_double(key, v);
  else if (key == "reference.q") c.ref_q = to_rule(key, v, {"equilibrium"});
  else if (key == "reference.p") c.ref_p = to_rule(key, v, {"first_harmonic", "zero"});
  else if (key == "reference.gamma") c.ref_gamma = to_rule(key, v, {"harmonic"});
  else if (key == "sampling.n") c.n_traj = static_cast<int>(to_int(key, v));
  else if (key == "sampling.seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "sampling.density") {
    if (v == "auto") c.sampling.reset();
    else c.sampling = parse_sampling(v);
  }
  else if (key == "dynamics.dt") c.dt = to_double(key, v);
  else if (key == "dynamics.steps") c.nsteps = static_cast<int>(to_int(key, v));
  else if (key == "dynamics.escape_radius") c.escape_radius = to_double(key, v);
  else if (key == "estimator") c.estimator = parse_estimator(v);
  else if (key == "prefactor.methods") {
    c.methods.clear();
    for (const auto& m : split_list(v)) c.methods.push_back(parse_prefactor_method(m));
  } else if (key == "prefactor.johnson_policy") c.johnson_policy = parse_johnson_policy(v);
  else if (key == "stability.policy") c.stability.kind = parse_policy_kind(v);
  else if (key == "stability.det_tol") c.stability.det_tol = to_double(key, v);
  else if (key == "stability.kay_threshold") c.stability.kay_threshold = to_double(key, v);
  else if (key == "stability.eps_thr") c.stability.eps_thr = to_double(key, v);
  else if (key == "stability.max_modes") c.stability.max_modes = static_cast<int>(to_int(key, v));
  else if (key == "stability.taming") c.stability.taming = parse_taming(v);
  else if (key == "spectrum.emin") c.emin = to_double(key, v);
  else if (key == "spectrum.emax") c.emax = to_double(key, v);
  else if (key == "spectrum.pad") c.pad = static_cast<int>(to_int(key, v));
  else if (key == "spectrum.window") c.window = parse_window(v);
  else if (key == "peaks.min_height") c.peak_min_height = to_double(key, v);
  else if (key == "peaks.min_separation") c.peak_min_separation = to_double(key, v);
  else if (key == "mae.window") c.mae_window = to_double(key, v);
  else if (key == "mae.pairing") c.mae_pairing = parse_pairing(v);
  else if (key == "levels") c.levels = to_doubles(key, v);
  else if (key == "dvr.enabled") c.dvr_enabled = to_bool(key, v);
  else if (key == "dvr.x") {
    if (c.dvr_grid.axes.size() < 1) c.dvr_grid.axes.resize(1);
    c.dvr_grid.axes[0] = to_axis(key, v);
  } else if (key == "dvr.y") {
    if (c.dvr_grid.axes.size() < 2) c.dvr_grid.axes.resize(2);
    c.dvr_grid.axes[1] = to_axis(key, v);
  } else if (key == "dvr.states") c.dvr_states = static_cast<int>(to_int(key, v));
  else if (key == "run.threads") c.threads = static_cast<int>(to_int(key, v));
  else if (key == "run.inapplicable_fraction") c.inapplicable_fraction = to_double(key, v);
  else if (key == "output.dir") c.out_dir = v;
  else if (key == "output.units") {
    if (v != "au" && v != "cm") throw ConfigError(key, "expected au or cm, got '" + v + "'");
    c.units_cm = v == "cm";
  } else if (key == "output.dump_trajectories") c.dump_trajectories = static_cast<int>(to_int(key, v));
  else throw ConfigError(key, "unknown key");
}

/// Every problem found, each tagged with its field path. Empty when valid.
inline std::vector<ConfigIssue> validate(const RunConfig& c) {
  std::vector<ConfigIssue> bad;
  auto need = [&](bool ok, const char* f, const std::string& m) {
    if (!ok) bad.push_back({f, m});
  };
  const int F = c.pes.dimension();
  need(F >= 1 && F <= kMaxDim, "pes", "dimension must be 1.." + std::to_string(kMaxDim));
  if (F >= 1 && F <= kMaxDim) {
    try {
      dispatch_dim(F, [&](auto dim) { Potential<decltype(dim)::value> p(c.pes); });
    } catch (const ConfigError& e) {
      bad.push_back({e.field().empty() ? "pes" : e.field(), e.what()});
    }
    auto check_vec = [&](const VectorRule& r, const char* f) {
      if (r.rule.empty() && static_cast<int>(r.values.size()) != F)
        bad.push_back({f, "expected " + std::to_string(F) + " values"});
    };
    check_vec(c.ref_q, "reference.q");
    check_vec(c.ref_p, "reference.p");
    check_vec(c.ref_gamma, "reference.gamma");
    if (c.ref_gamma.rule.empty())
      for (double g : c.ref_gamma.values) need(g > 0, "reference.gamma", "widths must be positive");
  }
  need(c.n_traj > 0, "sampling.n", "must be positive");
  need(c.dt > 0 && std::isfinite(c.dt), "dynamics.dt", "must be positive");
  need(c.nsteps > 0, "dynamics.steps", "must be positive");
  need(c.escape_radius > 0, "dynamics.escape_radius", "must be positive");
  need(!c.methods.empty(), "prefactor.methods", "at least one method required");
  need(c.stability.det_tol > 0, "stability.det_tol", "must be positive");
  need(c.stability.eps_thr > 0, "stability.eps_thr", "must be positive");
  need(c.stability.max_modes >= 1, "stability.max_modes", "must be >= 1");
  need(c.emax > c.emin && c.emin >= 0, "spectrum.emax", "need 0 <= emin < emax");
  need(c.pad >= 4, "spectrum.pad", "must be >= 4");
  need(c.peak_min_height >= 0 && c.peak_min_height < 1, "peaks.min_height", "must be in [0, 1)");
  need(c.peak_min_separation >= 0, "peaks.min_separation", "must be >= 0");
  need(c.mae_window > 0, "mae.window", "must be positive");
  need(c.threads >= 0, "run.threads", "must be >= 0");
  need(c.inapplicable_fraction >= 0 && c.inapplicable_fraction <= 1, "run.inapplicable_fraction",
       "must be in [0, 1]");
  need(c.dump_trajectories >= 0, "output.dump_trajectories", "must be >= 0");
  if (c.dvr_enabled) {
    need(c.dvr_grid.dimension() == F, "dvr", "grid dimension must match the potential");
    try {
      c.dvr_grid.validate();
    } catch (const ConfigError& e) {
      bad.push_back({e.field(), e.what()});
    }
    need(c.dvr_states >= 1, "dvr.states", "must be >= 1");
  }
  return bad;
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    apply_config_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  auto issues = validate(c);
  if (!issues.empty()) {
    std::string msg = issues.front().message;
    for (std::size_t i = 1; i < issues.size(); ++i) msg += "; " + issues[i].field + ": " + issues[i].message;
    throw ConfigError(issues.front().field, msg);
  }
  return c;
}

inline RunConfig parse_config_string(const std::string& s) {
  std::istringstream in(s);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  return parse_config(in);
}

/// Canonical text form; parse_config(serialize(c)) == c.
inline std::string serialize(const RunConfig& c) {
  using detail::fmt;
  std::ostringstream o;
  o << "name = " << c.name << "\n";
  o << "pes.kind = " << to_string(c.pes.kind) << "\n";
  for (const auto& [k, v] : c.pes.params) o << "pes." << k << " = " << fmt(v) << "\n";
  o << "reference.q = " << fmt(c.ref_q) << "\n";
  o << "reference.p = " << fmt(c.ref_p) << "\n";
  o << "reference.gamma = " << fmt(c.ref_gamma) << "\n";
  o << "sampling.n = " << c.n_traj << "\n";
  o << "sampling.seed = " << c.seed << "\n";
  o << "sampling.density = " << (c.sampling ? to_string(*c.sampling) : std::string("auto")) << "\n";
  o << "dynamics.dt = " << fmt(c.dt) << "\n";
  o << "dynamics.steps = " << c.nsteps << "\n";
  o << "dynamics.escape_radius = " << fmt(c.escape_radius) << "\n";
  o << "estimator = " << to_string(c.estimator) << "\n";
  o << "prefactor.methods = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) o << (i ? ", " : "") << to_string(c.methods[i]);
  o << "\n";
  o << "prefactor.johnson_policy = " << to_string(c.johnson_policy) << "\n";
  o << "stability.policy = " << to_string(c.stability.kind) << "\n";
  o << "stability.det_tol = " << fmt(c.stability.det_tol) << "\n";
  o << "stability.kay_threshold = " << fmt(c.stability.kay_threshold) << "\n";
  o << "stability.eps_thr = " << fmt(c.stability.eps_thr) << "\n";
  o << "stability.max_modes = " << c.stability.max_modes << "\n";
  o << "stability.taming = " << to_string(c.stability.taming) << "\n";
  o << "spectrum.emin = " << fmt(c.emin) << "\n";
  o << "spectrum.emax = " << fmt(c.emax) << "\n";
  o << "spectrum.pad = " << c.pad << "\n";
  o << "spectrum.window = " << to_string(c.window) << "\n";
  o << "peaks.min_height = " << fmt(c.peak_min_height) << "\n";
  o << "peaks.min_separation = " << fmt(c.peak_min_separation) << "\n";
  o << "mae.window = " << fmt(c.mae_window) << "\n";
  o << "mae.pairing = " << to_string(c.mae_pairing) << "\n";
  if (!c.levels.empty()) o << "levels = " << fmt(c.levels) << "\n";
  o << "dvr.enabled = " << (c.dvr_enabled ? "true" : "false") << "\n";
  const char* axname[] = {"dvr.x", "dvr.y"};
  for (std::size_t d = 0; d < c.dvr_grid.axes.size() && d < 2; ++d) {
    const auto& a = c.dvr_grid.axes[d];
    o << axname[d] << " = " << fmt(a.a) << ", " << fmt(a.b) << ", " << a.n << "\n";
  }
  o << "dvr.states = " << c.dvr_states << "\n";
  o << "run.threads = " << c.threads << "\n";
  o << "run.inapplicable_fraction = " << fmt(c.inapplicable_fraction) << "\n";
  o << "output.dir = " << c.out_dir << "\n";
  o << "output.units = " << (c.units_cm ? "cm" : "au") << "\n";
  o << "output.dump_trajectories = " << c.dump_trajectories << "\n";
  return o.str();
}

}  // namespace scivr
