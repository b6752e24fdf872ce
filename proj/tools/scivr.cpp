// Command-line front end.
//   scivr run <config>            one experiment, all outputs to --out
//   scivr compare <configs...>    run each and print the cross-method table
//   scivr dvr <config>            DVR reference levels only
//   scivr peaks <spectrum-file>   peak list (and MAE with --levels)
// Exit codes: 0 ok, 2 invalid input, 3 every requested method inapplicable.

#include "scivr/scivr.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
};

scivr::RunConfig load(const std::string& path, const Overrides& o) {
  auto c = scivr::load_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.threads > 0) c.threads = o.threads;
  if (!o.out.empty()) c.out_dir = o.out;
  return c;
}

void print_summary(const scivr::RunSummary& s) {
  const auto& st = s.stats;
  std::printf("%s: %lld trajectories in %.1f s\n", s.config.name.c_str(), st.n, s.wall_seconds);
  std::printf("  rejection det %.1f%%  kay %.1f%%  tamed %.1f%% (max %d)\n",
              100 * st.fraction(st.det_rejected), 100 * st.fraction(st.kay_rejected),
              100 * st.fraction(st.tamed), st.max_tamings);
  if (!s.regularization_outcome.empty())
    std::printf("  regularization %s (%.1f%% of trajectories diverged)\n",
                s.regularization_outcome.c_str(), 100 * s.regularization_failed_fraction);
  for (const auto& m : s.methods) {
    if (m.inapplicable) {
      std::printf("  %-10s inapplicable: %s\n", m.key.c_str(), m.reason.c_str());
      continue;
    }
    std::printf("  %-10s", m.key.c_str());
    int shown = 0;
    for (const auto& p : m.peaks) {
      if (shown++ == 6) break;
      std::printf(" %.4f", scivr::energy_out(s.config, p.E));
    }
    if (m.zpe) std::printf("  ZPE %.4f", scivr::energy_out(s.config, *m.zpe));
    if (m.mae.value) std::printf("  MAE %.4f", scivr::energy_out(s.config, *m.mae.value));
    std::printf("\n");
  }
}

int cmd_peaks(const std::string& path, double min_height, double min_sep,
              const std::vector<double>& levels, double window, const std::string& pairing) {
  std::ifstream in(path);
  if (!in) throw scivr::ConfigError("peaks", "cannot open '" + path + "'");
  std::vector<double> E, I;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double e, i;
    if (!(ls >> e >> i)) throw scivr::ConfigError("peaks", "malformed line: " + line);
    E.push_back(e);
    I.push_back(i);
  }
  auto peaks = scivr::find_peaks(E, I, min_height, min_sep);
  std::printf("# E_peak height\n");
  for (const auto& p : peaks) std::printf("%.6f %.6e\n", p.E, p.height);
  if (!levels.empty()) {
    auto r = scivr::mae(peaks, levels, window, scivr::parse_pairing(pairing));
    if (r.value) std::printf("# MAE %.6f over %zu levels, %zu unpaired\n", *r.value, r.pairs.size(), r.unpaired.size());
    else std::printf("# MAE undefined: no level paired within %.4g\n", window);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical power spectra with prefactor approximations"};
  app.require_subcommand(1);
  Overrides ov;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override sampling.seed");
  app.add_option("--threads", ov.threads, "Worker threads (0 = config / all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", ov.out, "Override output.dir");

  std::string cfg;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", cfg)->required();
  run->fallthrough();

  std::vector<std::string> cfgs;
  auto* cmp = app.add_subcommand("compare", "Run configs and print the method comparison table");
  cmp->add_option("configs", cfgs)->required();
  cmp->fallthrough();

  auto* dvr = app.add_subcommand("dvr", "Compute DVR reference levels");
  dvr->add_option("config", cfg)->required();
  dvr->fallthrough();

  std::string spec_file;
  double min_height = 0.01, min_sep = 0.02, window = 0.1;
  std::vector<double> levels;
  auto* pk = app.add_subcommand("peaks", "Find peaks in a two-column spectrum file");
  pk->add_option("spectrum", spec_file)->required();
  pk->add_option("--min-height", min_height, "Fraction of the global maximum");
  pk->add_option("--min-separation", min_sep, "Merge distance");
  pk->add_option("--levels", levels, "Reference levels for MAE")->delimiter(',');
  pk->add_option("--window", window, "MAE pairing window");
  std::string pairing = "nearest";
  pk->add_option("--pairing", pairing, "nearest, tallest or exclusive");
  pk->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*seed_opt) ov.seed = seed;

  try {
    if (*run) {
      auto c = load(cfg, ov);
      auto s = scivr::run_experiment(c);
      scivr::write_outputs(s);
      print_summary(s);
      return s.exit_code();
    }
    if (*cmp) {
      std::vector<scivr::RunSummary> runs;
      for (const auto& f : cfgs) {
        auto c = load(f, ov);
        runs.push_back(scivr::run_experiment(c));
        scivr::write_outputs(runs.back());
        print_summary(runs.back());
      }
      const std::string table = scivr::compare_methods(runs);
      std::cout << table;
      const std::string dir = ov.out.empty() ? runs.front().config.out_dir : ov.out;
      std::ofstream(std::filesystem::path(dir) / "comparison.dat") << table;
      bool any = false;
      for (const auto& r : runs) any = any || !r.all_inapplicable();
      return any ? 0 : 3;
    }
    if (*dvr) {
      auto c = load(cfg, ov);
      if (!c.dvr_enabled || c.dvr_grid.axes.empty())
        throw scivr::ConfigError("dvr", "config has no dvr block (set dvr.enabled and dvr.x/dvr.y)");
      scivr::DvrOptions o;
      auto r = scivr::dvr_refine(c.pes, c.dvr_grid, c.dvr_states, o);
      std::filesystem::create_directories(c.out_dir);
      std::ofstream f(std::filesystem::path(c.out_dir) / (c.name + "_levels.dat"));
      f << "# level energy residual coarse_grid_energy\n";
      std::printf("# level energy residual coarse_grid_energy\n");
      for (int k = 0; k < c.dvr_states; ++k) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d %.10f %.2e %.10f\n", k, scivr::energy_out(c, r.fine.energies[k]),
                      r.fine.residuals[k], scivr::energy_out(c, r.coarse.energies[k]));
        f << buf;
        std::printf("%s", buf);
      }
      std::printf("# max shift under refinement %.3e\n", scivr::energy_out(c, r.max_shift));
      return 0;
    }
    if (*pk) return cmd_peaks(spec_file, min_height, min_sep, levels, window, pairing);
  } catch (const scivr::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
  return 0;
}
