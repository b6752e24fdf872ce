#include "scivr/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace scivr;

namespace {

const char* kMinimal = R"(
name = t
pes.kind = henon_heiles
pes.lambda = 0.11803   # soft chaos
sampling.n = 10
dynamics.steps = 10
)";

std::string field_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, Defaults) {
  auto c = parse_config_string(kMinimal);
  EXPECT_EQ(c.pes.kind, PesKind::HenonHeiles);
  EXPECT_DOUBLE_EQ(c.pes.get("lambda"), 0.11803);
  EXPECT_EQ(c.ref_p.rule, "first_harmonic");
  EXPECT_EQ(c.estimator, Estimator::TA);
  EXPECT_EQ(c.sampling_density(), Sampling::Husimi);
  c.estimator = Estimator::HK;
  EXPECT_EQ(c.sampling_density(), Sampling::Modulus);
  c.sampling = Sampling::Husimi;
  EXPECT_EQ(c.sampling_density(), Sampling::Husimi);
  EXPECT_DOUBLE_EQ(c.kay_threshold(), 10.0);
}

TEST(Config, RoundTrip) {
  auto c = parse_config_string(std::string(kMinimal) + R"(
prefactor.methods = exact, rt2, johnson
stability.policy = kay
stability.kay_threshold = 123.5
estimator = hk
sampling.density = husimi
levels = 1, 2.5, 3.25
dvr.enabled = true
dvr.x = -6, 6, 32
dvr.y = -5, 7, 24
mae.pairing = tallest
reference.p = 1.5, 0.25
)");
  auto back = parse_config_string(serialize(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize(back), serialize(c));
}

TEST(Config, BundledConfigsRoundTrip) {
  const std::filesystem::path dir = std::filesystem::path(SCIVR_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".config") continue;
    auto c = load_config(e.path().string());
    EXPECT_EQ(parse_config_string(serialize(c)), c) << e.path();
    ++n;
  }
  EXPECT_GE(n, 3);
}

TEST(Config, WavenumberKeys) {
  auto c = parse_config_string(R"(
pes.kind = morse_quartic
pes.D = 0.2
pes.omega1_cm = 3000
pes.omega2_cm = 1700
pes.beta = 0.02
pes.lambda = 1e-6
spectrum.emax_cm = 12000
levels_cm = 2000, 4000
)");
  EXPECT_DOUBLE_EQ(c.pes.get("omega1"), 3000 * kCmToHartree);
  EXPECT_DOUBLE_EQ(c.emax, 12000 * kCmToHartree);
  ASSERT_EQ(c.levels.size(), 2u);
  EXPECT_DOUBLE_EQ(c.levels[1], 4000 * kCmToHartree);
  EXPECT_EQ(field_of("pes.kind = harmonic\npes.omega1 = 1\nsampling.n_cm = 5\n"), "sampling.n_cm");
}

TEST(Config, ValidationNamesTheField) {
  const std::string base = "pes.kind = harmonic\npes.omega1 = 1\n";
  EXPECT_EQ(field_of(base + "prefactor.methods = \n"), "prefactor.methods");
  EXPECT_EQ(field_of(base + "prefactor.methods = exact, rt0\n"), "prefactor.methods");
  EXPECT_EQ(field_of(base + "dynamics.dt = -0.1\n"), "dynamics.dt");
  EXPECT_EQ(field_of(base + "dynamics.dt = abc\n"), "dynamics.dt");
  EXPECT_EQ(field_of(base + "sampling.n = 0\n"), "sampling.n");
  EXPECT_EQ(field_of(base + "stability.policy = sometimes\n"), "stability.policy");
  EXPECT_EQ(field_of(base + "stability.det_tol = 0\n"), "stability.det_tol");
  EXPECT_EQ(field_of(base + "spectrum.emin = 3\nspectrum.emax = 2\n"), "spectrum.emax");
  EXPECT_EQ(field_of(base + "reference.p = 1, 2\n"), "reference.p");
  EXPECT_EQ(field_of(base + "estimator = xx\n"), "estimator");
  EXPECT_EQ(field_of(base + "no_such_key = 1\n"), "no_such_key");
  EXPECT_EQ(field_of(base + "just a line\n"), "line 3");
  EXPECT_EQ(field_of(base + "dvr.enabled = true\ndvr.x = -1, 1, 8\n"), "dvr.axis1");
  EXPECT_EQ(field_of("pes.kind = henon_heiles\n"), "pes.lambda");
  EXPECT_EQ(field_of(base + "sampling.density = uniform\n"), "sampling.density");
  EXPECT_EQ(field_of(base), "");
}

TEST(Config, ValidateCollectsEveryIssue) {
  RunConfig c;
  c.pes = harmonic({1.0});
  c.n_traj = 0;
  c.dt = 0;
  c.methods.clear();
  auto issues = validate(c);
  std::vector<std::string> fields;
  for (const auto& i : issues) fields.push_back(i.field);
  EXPECT_NE(std::find(fields.begin(), fields.end(), "sampling.n"), fields.end());
  EXPECT_NE(std::find(fields.begin(), fields.end(), "dynamics.dt"), fields.end());
  EXPECT_NE(std::find(fields.begin(), fields.end(), "prefactor.methods"), fields.end());
}

TEST(Config, MissingFile) {
  EXPECT_THROW(load_config("/nonexistent/x.config"), ConfigError);
}
