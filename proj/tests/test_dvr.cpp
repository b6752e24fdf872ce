#include "scivr/dvr.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace scivr;

namespace {

DvrGrid grid1(double a, double b, int n) { return DvrGrid{{DvrAxis{a, b, n}}}; }
DvrGrid grid2(double a, double b, int n) { return DvrGrid{{DvrAxis{a, b, n}, DvrAxis{a, b, n}}}; }

}  // namespace

TEST(Dvr, HarmonicOneDimension) {
  auto r = dvr_solve(harmonic({1.0}), grid1(-10, 10, 128), 3);
  ASSERT_EQ(r.energies.size(), 3u);
  for (int n = 0; n < 3; ++n) EXPECT_NEAR(r.energies[n], n + 0.5, 1e-8);
}

TEST(Dvr, MorseOneDimensionAnalytic) {
  const double D = 0.2, w = 0.02;
  auto r = dvr_solve(morse_1d(D, w), grid1(-40, 100, 160), 6);
  for (int n = 0; n < 6; ++n) {
    const double x = w * (n + 0.5);
    EXPECT_NEAR(r.energies[n], x - x * x / (4 * D), 1e-6) << "level " << n;
  }
}

TEST(Dvr, GridDoublingConvergence) {
  auto a = dvr_solve(harmonic({1.0}), grid1(-10, 10, 64), 8);
  auto b = dvr_solve(harmonic({1.0}), grid1(-10, 10, 128), 8);
  for (int n = 0; n < 8; ++n) EXPECT_LT(std::abs(a.energies[n] - b.energies[n]), 1e-6);
  auto c = dvr_solve(harmonic({1.0, 1.0}), grid2(-8, 8, 48), 6);
  auto d = dvr_solve(harmonic({1.0, 1.0}), grid2(-8, 8, 96), 6);
  for (int n = 0; n < 6; ++n) EXPECT_LT(std::abs(c.energies[n] - d.energies[n]), 1e-6);
}

TEST(Dvr, HarmonicTwoDimensionsDenseAndIterativeAgree) {
  DvrOptions dense;
  dense.method = DvrMethod::Dense;
  DvrOptions dav;
  dav.method = DvrMethod::Davidson;
  auto a = dvr_solve(harmonic({1.0, 1.5}), grid2(-7, 7, 40), 6, dense);
  auto b = dvr_solve(harmonic({1.0, 1.5}), grid2(-7, 7, 40), 6, dav);
  const double expect[] = {1.25, 2.25, 2.75, 3.25, 3.75, 4.25};
  for (int n = 0; n < 6; ++n) {
    EXPECT_NEAR(a.energies[n], expect[n], 1e-7);
    EXPECT_NEAR(b.energies[n], a.energies[n], 1e-8);
  }
}

TEST(Dvr, HenonHeilesSoftLevelsAndResiduals) {
  const double lambda = 0.11803;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = dvr_solve(henon_heiles(lambda), grid2(-6, 6, 128), 19);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_TRUE(r.converged);
  for (int n = 0; n < 19; ++n) {
    EXPECT_LT(r.residuals[n], 1e-8) << "level " << n;
    if (n) EXPECT_GE(r.energies[n], r.energies[n - 1]);
  }
  // Second-order perturbation theory: E0 = 1 - lambda^2/9 + O(lambda^4).
  EXPECT_NEAR(r.energies[0], 1.0 - lambda * lambda / 9.0, std::pow(lambda, 4));
  // Symmetry-degenerate pairs.
  EXPECT_LT(std::abs(r.energies[1] - r.energies[2]), 1e-6);
  EXPECT_LT(std::abs(r.energies[4] - r.energies[5]), 1e-6);
  EXPECT_LT(secs, 60.0);
  // Larger box and finer grid move nothing.
  auto big = dvr_solve(henon_heiles(lambda), grid2(-7, 7, 160), 19);
  for (int n = 0; n < 19; ++n) EXPECT_NEAR(big.energies[n], r.energies[n], 1e-4) << "level " << n;
}

TEST(Dvr, RefinementReportsShift) {
  auto r = dvr_refine(harmonic({1.0}), grid1(-10, 10, 128), 4);
  EXPECT_LT(r.max_shift, 1e-6);
  EXPECT_EQ(r.coarse.energies.size(), 4u);
}

TEST(Dvr, OverlapWithGroundState) {
  DvrOptions o;
  o.vectors = true;
  const DvrGrid g = grid2(-8, 8, 64);
  auto r = dvr_solve(harmonic({1.0, 1.0}), g, 3, o);
  CoherentState<2> c;  // ground state of the oscillator
  auto ref = Reference<2>::single(c);
  EXPECT_NEAR(overlap_with_reference<2>(r.vectors.col(0), ref, g), 1.0, 1e-6);
  // First excited pair is odd in x or y, the reference is even.
  EXPECT_LT(overlap_with_reference<2>(r.vectors.col(1), ref, g), 1e-10);
  EXPECT_LT(overlap_with_reference<2>(r.vectors.col(2), ref, g), 1e-10);
}

TEST(Dvr, OverlapsOfDisplacedReferenceArePoisson) {
  // A coherent state with |alpha|^2 = (q^2 + p^2)/2 has Poisson weights.
  DvrOptions o;
  o.vectors = true;
  const DvrGrid g = grid1(-10, 10, 128);
  auto r = dvr_solve(harmonic({1.0}), g, 8, o);
  CoherentState<1> c;
  c.p[0] = std::sqrt(3.0);
  auto ref = Reference<1>::single(c);
  const double a2 = 1.5;
  double fact = 1.0;
  for (int n = 0; n < 8; ++n) {
    if (n) fact *= n;
    EXPECT_NEAR(overlap_with_reference<1>(r.vectors.col(n), ref, g), std::exp(-a2) * std::pow(a2, n) / fact, 1e-8);
  }
}

TEST(Dvr, Validation) {
  EXPECT_THROW(dvr_solve(harmonic({1.0}), grid1(1, -1, 32), 1), ConfigError);
  EXPECT_THROW(dvr_solve(harmonic({1.0}), grid1(-1, 1, 8), 1), ConfigError);
  EXPECT_THROW(dvr_solve(harmonic({1.0}), grid1(-1, 1, 32), 40), ConfigError);
  EXPECT_THROW(dvr_solve(henon_heiles(0.1), grid1(-1, 1, 32), 1), ConfigError);
}
