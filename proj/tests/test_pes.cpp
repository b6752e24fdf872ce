#include "scivr/pes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace scivr;

namespace {

std::vector<PesSpec> all_kinds() {
  return {henon_heiles(0.11803), henon_heiles(0.4),
          morse_quartic(0.2, 3000 * kCmToHartree, 1700 * kCmToHartree, 0.02, 1e-6),
          harmonic({1.0, 1.3}), harmonic({0.7}), morse_1d(0.2, 0.02)};
}

// Typical length scale of each surface, for picking test points.
double scale(const PesSpec& s) {
  switch (s.kind) {
    case PesKind::MorseQuartic:
    case PesKind::Morse1D:
      return 20.0;
    default:
      return 1.0;
  }
}

}  // namespace

TEST(Pes, HenonHeilesEquilibrium) {
  auto v = evaluate(henon_heiles(0.11803), Eigen::Vector2d::Zero());
  EXPECT_EQ(v.V, 0.0);
  EXPECT_EQ(v.grad.norm(), 0.0);
  EXPECT_TRUE(v.hess.isApprox(Eigen::Matrix2d::Identity()));
}

TEST(Pes, HenonHeilesValue) {
  auto v = evaluate(henon_heiles(0.4), Eigen::Vector2d(1.0, 1.0));
  EXPECT_NEAR(v.V, 1.0 + 0.4 - 0.4 / 3.0, 1e-14);
  EXPECT_NEAR(v.V, 1.26667, 1e-5);
}

TEST(Pes, HenonHeilesZeroCouplingIsIsotropicOscillator) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 50; ++t) {
    Eigen::Vector2d q(u(rng), u(rng));
    EXPECT_DOUBLE_EQ(evaluate(henon_heiles(0.0), q).V, 0.5 * q.squaredNorm());
  }
}

TEST(Pes, MorseQuarticEquilibrium) {
  const double w1 = 3000 * kCmToHartree, w2 = 1700 * kCmToHartree;
  auto v = evaluate(morse_quartic(0.2, w1, w2, 0.02, 1e-6), Eigen::Vector2d::Zero());
  EXPECT_EQ(v.V, 0.0);
  EXPECT_EQ(v.grad.norm(), 0.0);
  EXPECT_NEAR(v.hess(0, 0), w1 * w1, 1e-18);
  EXPECT_NEAR(v.hess(1, 1), w2 * w2, 1e-18);
  EXPECT_EQ(v.hess(0, 1), 0.0);
}

TEST(Pes, MorseAlpha) {
  EXPECT_DOUBLE_EQ(morse_alpha(0.5, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(morse_alpha(2.0, 2.0), 1.0);
  const double w = 3000 * 4.5563353e-6;
  const double a = morse_alpha(0.2, w);
  EXPECT_NEAR(2 * 0.2 * a * a, w * w, 1e-18);
  EXPECT_NEAR(a, 0.021613, 1e-6);
  EXPECT_THROW(morse_alpha(0.0, 1.0), ConfigError);
  EXPECT_THROW(morse_alpha(1.0, -1.0), ConfigError);
}

TEST(Pes, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& spec : all_kinds()) {
    const int F = spec.dimension();
    const double L = scale(spec);
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd q(F);
      for (int i = 0; i < F; ++i) q[i] = 0.8 * L * u(rng);
      const auto v = evaluate(spec, q);
      const double h = 1e-5 * L;
      for (int i = 0; i < F; ++i) {
        Eigen::VectorXd a = q, b = q;
        a[i] += h;
        b[i] -= h;
        const auto va = evaluate(spec, a), vb = evaluate(spec, b);
        const double g = (va.V - vb.V) / (2 * h);
        EXPECT_NEAR(g, v.grad[i], 1e-6 * std::max(std::abs(v.grad[i]), v.grad.norm() + 1e-12))
            << to_string(spec.kind) << " grad " << i;
        Eigen::VectorXd hc = (va.grad - vb.grad) / (2 * h);
        for (int j = 0; j < F; ++j)
          EXPECT_NEAR(hc[j], v.hess(j, i), 1e-5 * (v.hess.norm() + 1e-12))
              << to_string(spec.kind) << " hess " << i << j;
      }
      EXPECT_EQ((v.hess - v.hess.transpose()).norm(), 0.0);
    }
  }
}

TEST(Pes, EquilibriumIsStationary) {
  for (const auto& spec : all_kinds()) {
    auto v = evaluate(spec, equilibrium(spec));
    EXPECT_EQ(v.V, 0.0) << to_string(spec.kind);
    EXPECT_EQ(v.grad.norm(), 0.0) << to_string(spec.kind);
  }
}

TEST(Pes, HarmonicFrequencies) {
  auto w = harmonic_frequencies(harmonic({1.0, 1.3}));
  ASSERT_EQ(w.size(), 2u);
  EXPECT_NEAR(w[0], 1.0, 1e-12);
  EXPECT_NEAR(w[1], 1.3, 1e-12);
}

TEST(Pes, DimensionMismatchIsConfigError) {
  EXPECT_THROW(evaluate(henon_heiles(0.1), Eigen::VectorXd::Zero(3)), ConfigError);
  EXPECT_THROW(Potential<1>(henon_heiles(0.1)), ConfigError);
  EXPECT_THROW(parse_pes_kind("lennard_jones"), ConfigError);
  PesSpec missing{PesKind::HenonHeiles, {}};
  EXPECT_THROW(Potential<2>{missing}, ConfigError);
}
