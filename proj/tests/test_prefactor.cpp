#include "scivr/dynamics.hpp"
#include "scivr/prefactor.hpp"
#include "scivr/spectrum.hpp"
#include "scivr/stability.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <map>

using namespace scivr;

namespace {

const cplx I1(0.0, 1.0);

template <int F>
TrajectoryRecord<F> run(const PesSpec& spec, const PhasePoint<F>& z0, double dt, int n) {
  Potential<F> pot(spec);
  return propagate(pot, z0, dt, n, {.stage_hessians = true});
}

PhasePoint<2> hh_point(double x, double y, double px, double py) {
  PhasePoint<2> z;
  z.q << x, y;
  z.p << px, py;
  return z;
}

double max_dev(const PrefactorSeries& s, const std::function<cplx(int)>& ref) {
  double w = 0.0;
  for (int k = 0; k <= s.last(); ++k) w = std::max(w, std::abs(s.C[k] - ref(k)));
  return w;
}

}  // namespace

TEST(Prefactor, ExactIsOneAtIdentity) {
  std::vector<PhaseMat<2>> M{PhaseMat<2>::Identity()};
  auto s = prefactor_exact<2>(M, Vec<2>(1.0, 2.5));
  ASSERT_EQ(s.last(), 0);
  EXPECT_LT(std::abs(s.C[0] - 1.0), 1e-15);
  EXPECT_EQ(s.phi[0], 0.0);
}

TEST(Prefactor, ExactHarmonicOneDimension) {
  PhasePoint<1> z0;
  z0.q[0] = 0.7;
  const double dt = 0.1;
  auto tr = run<1>(harmonic({1.0}), z0, dt, 5000);
  auto s = prefactor_exact<1>(tr.monodromy, Vec<1>::Ones());
  ASSERT_EQ(s.last(), 5000);
  EXPECT_LT(max_dev(s, [&](int k) { return std::exp(-0.5 * I1 * (k * dt)); }), 1e-6);
  for (int k = 0; k <= s.last(); k += 250) {
    EXPECT_NEAR(std::abs(s.C[k]), 1.0, 1e-8);
    EXPECT_NEAR(s.phi[k], -0.5 * kHbar * k * dt, 1e-6);
  }
}

TEST(Prefactor, MonodromyAndAuxiliaryFormsAgree) {
  CoherentState<2> c;
  c.p.setConstant(std::sqrt(3.0));
  auto ref = Reference<2>::single(c);
  for (int i = 0; i < 5; ++i) {
    auto tr = run<2>(henon_heiles(0.11803), sample_reference(ref, 21, i), 0.1, 2000);
    auto a = prefactor_exact<2>(tr.monodromy, Vec<2>::Ones());
    auto b = prefactor_exact_qp<2>(tr.monodromy, Vec<2>::Ones());
    ASSERT_EQ(a.last(), b.last());
    for (int k = 0; k <= a.last(); ++k)
      ASSERT_LT(std::abs(a.C[k] - b.C[k]), 1e-8 * std::max(1.0, std::abs(a.C[k]))) << "step " << k;
  }
}

TEST(Prefactor, LogDerivativeHarmonicConstantR) {
  const Vec<2> w(1.0, 1.4);
  const int n = 1000;
  const double dt = 0.05;
  std::vector<CMat<2>> R(n + 1);
  std::vector<cplx> tr(n + 1);
  const CMat<2> R0 = (-I1 * kHbar * w.cast<cplx>()).asDiagonal();
  for (int k = 0; k <= n; ++k) {
    R[k] = R0;
    tr[k] = R0.trace() * (k * dt);
  }
  auto s = prefactor_logderivative<2>(R, tr, w);
  EXPECT_LT(std::abs(s.C[0] - 1.0), 1e-15);
  EXPECT_LT(max_dev(s, [&](int k) { return std::exp(-0.5 * I1 * w.sum() * (k * dt)); }), 1e-12);
}

TEST(Prefactor, LogDerivativeMatchesExactOnQuietTrajectory) {
  auto tr = run<2>(henon_heiles(0.11803), hh_point(0.1, 0.0, 1.0, 1.2), 0.1, 1000);
  const Vec<2> g = Vec<2>::Ones();
  auto rs = propagate_riccati(tr, g);
  auto a = prefactor_exact<2>(tr.monodromy, g);
  auto b = prefactor_logderivative<2>(rs, g);
  ASSERT_EQ(a.last(), 1000);
  ASSERT_EQ(b.last(), 1000);
  EXPECT_LT(max_dev(b, [&](int k) { return a.C[k]; }), 1e-5);
  EXPECT_EQ(b.C[0], cplx(1.0));
}

TEST(Prefactor, FormulationEquivalenceOnHenonHeilesEnsemble) {
  CoherentState<2> c;
  c.p.setConstant(std::sqrt(3.0));
  auto ref = Reference<2>::single(c);
  const Vec<2> g = Vec<2>::Ones();
  int compared = 0;
  for (int i = 0; i < 40; ++i) {
    auto tr = run<2>(henon_heiles(0.11803), sample_reference(ref, 8, i), 0.1, 5000);
    auto a = prefactor_exact<2>(tr.monodromy, g);
    auto rs = propagate_riccati(tr, g);
    auto b = prefactor_logderivative<2>(rs, g);
    if (a.diverged || b.diverged || a.branch_warnings > 0) continue;
    ++compared;
    // Past the first volume-loss rejection the monodromy matrix itself has
    // lost all accuracy (|M| ~ 1e18 on the worst orbit); compare before it.
    int n = std::min(a.last(), b.last());
    for (int k = 0; k <= n; ++k)
      if (check_det(tr.monodromy[k]) > 1e-5) n = k - 1;
    for (int k = 0; k <= n; ++k)
      ASSERT_LT(std::abs(a.C[k] - b.C[k]), 1e-5 * std::max(1.0, std::abs(a.C[k])))
          << "trajectory " << i << " step " << k;
    EXPECT_LT(a.max_phase_jump, kPi);
    EXPECT_LT(b.max_phase_jump, kPi);
  }
  EXPECT_GT(compared, 30);
}

TEST(Prefactor, RtNScalarValues) {
  EXPECT_EQ(rt_n_scalar(1.0, 4.0, 1), cplx(0.0, -2.5));
  EXPECT_LT(std::abs(rt_n_scalar(1.0, 4.0, 2) - cplx(0.0, -2.05)), 1e-14);
  EXPECT_LT(std::abs(rt_n_scalar(1.0, 4.0, 3) - cplx(0.0, -2.000609756)), 1e-9);
  // Next order from the explicit R^(4) expression. The series is not
  // convergent here: it moves away from -i sqrt(k) = -2i again.
  EXPECT_LT(std::abs(rt_n_scalar(1.0, 4.0, 4) - cplx(0.0, -2.001219419)), 1e-9);
}

TEST(Prefactor, RtNLargeCurvatureStaysFinite) {
  // k >> h^2: R1 -> -i k/(2h), R2 -> -i k/(4h), R3 -> -i k/(8h). The raw
  // powers of (h - k/h) overflow long before the result does.
  for (double k : {1e10, 1e80, 1e200}) {
    for (int n = 1; n <= 3; ++n) {
      bool flag = false;
      const cplx r = rt_n_scalar(1.0, k, n, &flag);
      EXPECT_FALSE(flag);
      // Leading term only; corrections are O(h^2/k).
      EXPECT_NEAR(r.imag() / (-k / std::pow(2.0, n)), 1.0, 1e-12 + 100.0 / k) << "k " << k << " n " << n;
    }
  }
  EXPECT_NEAR(rt_n_scalar(2.0, -4e120, 3).imag() / 2.5e119, 1.0, 1e-9);
}

TEST(Prefactor, NonFiniteLogEndsTheSeries) {
  PrefactorSeries out;
  const std::vector<cplx> logs{0.0, cplx(0.1, 0.2), cplx(std::numeric_limits<double>::infinity(), 0.0), 0.3};
  detail::finish_from_log(logs, out);
  EXPECT_EQ(out.last(), 1);
  EXPECT_TRUE(out.diverged);
  PrefactorSeries big;
  detail::finish_from_log({0.0, cplx(2000.0, 0.0)}, big);
  EXPECT_EQ(big.last(), 0);
}

TEST(Prefactor, RtNFixedPoint) {
  for (double h : {0.3, 1.0, 2.7})
    for (int n = 1; n <= 6; ++n) {
      bool flag = false;
      EXPECT_EQ(rt_n_scalar(h, h * h, n, &flag), cplx(0.0, -h)) << "h " << h << " n " << n;
      EXPECT_FALSE(flag);
    }
  // Matrix form: K_t = (hbar gamma)^2 for every step keeps R = -i hbar gamma.
  const Vec<2> g(1.0, 1.0);
  Mat<2> K;
  K << 1.0, 0.0, 0.0, 1.0;
  std::vector<Mat<2>> Ks(100, K);
  for (int n = 1; n <= 3; ++n) {
    auto s = prefactor_rt_n<2>(Ks, g, n, 0.1);
    EXPECT_LT(max_dev(s, [&](int k) { return std::exp(-I1 * (k * 0.1)); }), 1e-12);
  }
}

TEST(Prefactor, RtNIsPurelyImaginary) {
  for (double k : {-3.0, -0.5, 0.0, 0.2, 1.0, 5.0, 40.0})
    for (int n = 1; n <= 4; ++n) EXPECT_EQ(rt_n_scalar(1.0, k, n).real(), 0.0);
}

TEST(Prefactor, RtNDenominatorGuard) {
  // h - k/h large and R1 = -(i/2)(h + k/h) -> 0 when k = -h^2.
  bool flag = false;
  auto r = rt_n_scalar(1.0, -1.0, 3, &flag);
  EXPECT_TRUE(flag);
  EXPECT_EQ(r, cplx(0.0, 0.0));
  EXPECT_THROW(prefactor_rt_n<1>({}, Vec<1>::Ones(), 0, 0.1), ConfigError);
}

TEST(Prefactor, HarmonicLimitCollapse) {
  const std::vector<double> w{1.0, 1.3};
  const Vec<2> g(1.0, 1.3);
  const double T = 500.0;
  // Methods built on the Hessian alone are exact here. Those built on the
  // monodromy matrix inherit the integrator's phase error, so they must
  // converge to the analytic prefactor at fourth order in dt.
  auto collapse = [&](double dt) {
    const int n = static_cast<int>(std::lround(T / dt));
    auto tr = run<2>(harmonic(w), hh_point(0.2, -0.1, 1.0, 1.3), dt, n);
    auto analytic = [&](int k) { return std::exp(-0.5 * I1 * (w[0] + w[1]) * (k * dt)); };
    auto exact = prefactor_exact<2>(tr.monodromy, g);
    std::vector<std::pair<std::string, PrefactorSeries>> all{
        {"exact", exact},
        {"logderiv", prefactor_logderivative<2>(propagate_riccati(tr, g), g)},
        {"adiabatic", prefactor_adiabatic<2>(tr, g)},
        {"pps", prefactor_pps(exact, n)},
        {"harmonic", prefactor_harmonic(w, n, dt)},
        {"johnson", prefactor_johnson<2>(tr.hessian, dt)},
        {"rt1", prefactor_rt_n<2>(tr.hessian, g, 1, dt)},
        {"rt2", prefactor_rt_n<2>(tr.hessian, g, 2, dt)},
        {"rt3", prefactor_rt_n<2>(tr.hessian, g, 3, dt)},
    };
    std::map<std::string, double> dev;
    for (const auto& [name, s] : all) {
      EXPECT_EQ(s.last(), n) << name;
      EXPECT_LT(std::abs(s.C[0] - 1.0), 1e-14) << name;
      EXPECT_EQ(s.phi[0], 0.0) << name;
      EXPECT_LT(s.max_phase_jump, kPi) << name;
      dev[name] = max_dev(s, analytic);
    }
    return dev;
  };
  auto coarse = collapse(0.1);
  auto fine = collapse(0.05);
  for (const auto& [name, d] : coarse) {
    if (name == "exact" || name == "logderiv" || name == "adiabatic" || name == "pps") {
      EXPECT_LT(d, 1e-5) << name;
      EXPECT_NEAR(std::log2(d / fine[name]), 4.0, 0.3) << name;
    } else {
      EXPECT_LT(d, 1e-10) << name;
    }
  }
}

TEST(Prefactor, JohnsonImaginaryFrequencies) {
  // K with a negative eigenvalue on every step.
  Mat<1> K;
  K << -4.0;
  std::vector<Mat<1>> Ks(101, K);
  auto fail = prefactor_johnson<1>(Ks, 0.1, JohnsonPolicy::Fail);
  ASSERT_EQ(fail.last(), 100);
  EXPECT_EQ(fail.flagged_steps, 101);
  // |C| = exp(int |omega|/2) = exp(10 * 1)
  EXPECT_NEAR(std::log(std::abs(fail.C.back())), 10.0, 1e-12);
  auto clamp = prefactor_johnson<1>(Ks, 0.1, JohnsonPolicy::ClampZero);
  EXPECT_NEAR(std::abs(clamp.C.back()), 1.0, 1e-15);
  EXPECT_FALSE(clamp.inapplicable);

  std::vector<Mat<1>> long_run(200000, K);
  auto over = prefactor_johnson<1>(long_run, 0.1, JohnsonPolicy::Fail);
  EXPECT_TRUE(over.inapplicable);
  EXPECT_LT(over.last(), 200000 - 1);
}

TEST(Prefactor, JohnsonOnHenonHeilesTrajectorySeesNegativeCurvature) {
  // Near the saddle at y = 1/(2 lambda) one Hessian eigenvalue is negative.
  Potential<2> pot(henon_heiles(0.11803));
  Vec<2> q(0.0, 4.5);
  Mat<2> K = pot(q).hess;
  auto s = prefactor_johnson<2>(std::vector<Mat<2>>(10, K), 0.1);
  EXPECT_EQ(s.flagged_steps, 10);
  EXPECT_GT(std::abs(s.C.back()), 1.0);
}

TEST(Prefactor, PoorPersonsNeedsFullCentralTrajectory) {
  PrefactorSeries central = prefactor_harmonic({1.0}, 10, 0.1);
  EXPECT_FALSE(prefactor_pps(central, 10).inapplicable);
  EXPECT_TRUE(prefactor_pps(central, 20).inapplicable);
  central.diverged = true;
  EXPECT_TRUE(prefactor_pps(central, 10).inapplicable);
}

TEST(Prefactor, MethodNames) {
  for (const char* s : {"exact", "logderiv", "adiabatic", "pps", "harmonic", "johnson", "rt1", "rt2", "rt7"})
    EXPECT_EQ(to_string(parse_prefactor_method(s)), s);
  EXPECT_EQ(parse_prefactor_method("rt3").n, 3);
  for (const char* s : {"rt0", "rt", "rtx", "hk", ""}) EXPECT_THROW(parse_prefactor_method(s), ConfigError);
}

TEST(Prefactor, UnwrapPhaseIsContinuous) {
  std::vector<cplx> z;
  for (int k = 0; k < 200; ++k) z.push_back(std::polar(1.0, 0.3 * k));
  auto ph = unwrap_phase(z);
  for (int k = 0; k < 200; ++k) EXPECT_NEAR(ph[k], 0.3 * k, 1e-12);
}
