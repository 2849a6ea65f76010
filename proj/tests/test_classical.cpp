#include <gtest/gtest.h>

#include <cmath>

#include "sid/classical.hpp"
#include "sid/kernels.hpp"

using namespace sid;
using charts::Chart;
using charts::Predicate;
using classical::Level;

namespace {

Chart chart_of(dynamics::System sys, Predicate p, charts::Section sec = {}) {
  Chart c;
  c.label = "c";
  c.system = sys;
  c.predicate = std::move(p);
  c.section = sec;
  c.constants = {dynamics::make_constant(sys, "hamiltonian", {})};
  return c;
}

Chart whole_harmonic(double omega = 1.0) { return chart_of(dynamics::harmonic(omega), Predicate::energy_window(0, 100)); }

// Pendulum (w0 = 1) in closed form with k^2 = E / 2.
double libration_period(double e) { return 4.0 * std::comp_ellint_1(std::sqrt(e / 2)); }
double libration_action(double e) {
  const double k = std::sqrt(e / 2);
  return 8.0 / kPi * (std::comp_ellint_2(k) - (1 - k * k) * std::comp_ellint_1(k));
}
double rotation_period(double e) {
  const double k = std::sqrt(e / 2);
  return 2.0 * std::comp_ellint_1(1 / k) / k;
}
double rotation_action(double e) {
  const double k = std::sqrt(e / 2);
  return 4.0 * k / kPi * std::comp_ellint_2(1 / k);
}

}  // namespace

TEST(ActionAngle, HarmonicPeriodActionFrequency) {
  const double omega = 1.7;
  const auto aa = classical::build_action_angle(whole_harmonic(omega), {{0.5, 0}, {1.0, 0}, {2.0, 0}});
  for (const auto& r : aa.orbits) {
    ASSERT_TRUE(r.reachable) << r.reason;
    EXPECT_NEAR(r.period, 2 * kPi / omega, 1e-10);
    EXPECT_NEAR(r.action, r.level.energy / omega, 1e-10);
    EXPECT_NEAR(r.frequency, omega, 1e-9);
    EXPECT_NEAR(r.volume, r.period, 1e-10);
    EXPECT_LT(r.closure_error, 1e-10);
  }
  EXPECT_TRUE(aa.action_monotone);
}

TEST(ActionAngle, PendulumLibrationMatchesEllipticIntegrals) {
  const Chart c = chart_of(dynamics::pendulum(), Predicate::separatrix_side(true, 0, false));
  const auto aa = classical::build_action_angle(c, {{0.2, 0}, {1.0, 0}, {1.8, 0}});
  for (const auto& r : aa.orbits) {
    ASSERT_TRUE(r.reachable) << r.reason;
    EXPECT_NEAR(r.period / libration_period(r.level.energy), 1.0, 1e-10) << "E = " << r.level.energy;
    EXPECT_NEAR(r.action / libration_action(r.level.energy), 1.0, 1e-9) << "E = " << r.level.energy;
  }
}

TEST(ActionAngle, PendulumRotationMatchesEllipticIntegrals) {
  const Chart c = chart_of(dynamics::pendulum(), Predicate::separatrix_side(false, +1, true));
  const auto aa = classical::build_action_angle(c, {{2.5, 0}, {4.0, 0}});
  for (const auto& r : aa.orbits) {
    ASSERT_TRUE(r.reachable) << r.reason;
    EXPECT_NEAR(r.period / rotation_period(r.level.energy), 1.0, 1e-10) << "E = " << r.level.energy;
    EXPECT_NEAR(r.action / rotation_action(r.level.energy), 1.0, 1e-9) << "E = " << r.level.energy;
  }
}

TEST(ActionAngle, FrequencyIsTheDerivativeOfEnergyInAction) {
  // dH/dJ by finite differences across closely spaced levels approaches 2 pi / T.
  const Chart c = chart_of(dynamics::pendulum(), Predicate::separatrix_side(true, 0, false));
  const auto aa = classical::build_action_angle(c, {{0.99, 0}, {1.0, 0}, {1.01, 0}});
  EXPECT_NEAR(aa.orbits[1].frequency / aa.orbits[1].angular_rate(), 1.0, 1e-4);
}

TEST(ActionAngle, UnreachableLevelsCarryAReason) {
  const auto aa = classical::build_action_angle(
      chart_of(dynamics::harmonic(), Predicate::energy_window(0.5, 2.0)), {{3.0, 0}, {-1.0, 0}, {1.0, 0}});
  EXPECT_FALSE(aa.orbits[0].reachable);
  EXPECT_FALSE(aa.orbits[0].reason.empty());
  EXPECT_FALSE(aa.orbits[1].reachable);
  EXPECT_TRUE(aa.orbits[2].reachable);
  EXPECT_THROW(classical::configuration_volume(aa, 0), PreconditionError);
}

TEST(ActionAngle, ShortBudgetDoesNotClose) {
  const auto aa = classical::build_action_angle(whole_harmonic(), {{1.0, 0}}, {1e-3, 3.0});
  EXPECT_FALSE(aa.orbits[0].reachable);
}

TEST(ConfigurationVolume, HalfPlaneHoldsHalfTheHarmonicPeriod) {
  const Chart c = chart_of(dynamics::harmonic(), Predicate::half_plane({0.0, 1.0}, 0.0), {0.0, 1});
  const auto aa = classical::build_action_angle(c, {{1.0, 0}});
  ASSERT_TRUE(aa.orbits[0].reachable);
  EXPECT_NEAR(classical::configuration_volume(aa, 0), kPi, 1e-6);
}

TEST(ConfigurationVolume, SeparableProduct) {
  const auto a = classical::build_action_angle(whole_harmonic(1.0), {{1.0, 0}});
  const auto b = classical::build_action_angle(whole_harmonic(2.0), {{1.0, 0}});
  EXPECT_NEAR(classical::configuration_volume({&a, &b}, {0, 0}), 2 * kPi * kPi, 1e-9);
}

TEST(AngleOf, HarmonicAngleIsTheAtan2OfPhasePoint) {
  // Seed on q = 0 with p > 0, so q = r sin(theta), p = r cos(theta).
  const auto aa = classical::build_action_angle(whole_harmonic(), {{1.0, 0}});
  const double r = std::sqrt(2.0);
  for (double th : {0.1, 1.0, 2.5, 4.0, 6.2}) {
    const double got = classical::angle_of(aa, 0, {r * std::sin(th), r * std::cos(th)});
    EXPECT_NEAR(std::remainder(got - th, 2 * kPi), 0.0, 1e-10) << "theta = " << th;
  }
}

TEST(Trajectory, HarmonicClosedForm) {
  const auto aa = classical::build_action_angle(whole_harmonic(), {{0.5, 0}});
  const auto tr = classical::sample_trajectory(aa, 0, 0.0, {}, 20.0, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    worst = std::max({worst, std::abs(tr.states[i][0] - std::sin(t)), std::abs(tr.states[i][1] - std::cos(t))});
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_LT(tr.energy_drift, 1e-8);
  EXPECT_FALSE(tr.exited_chart);
  ASSERT_EQ(tr.conserved.size(), 1u);
  EXPECT_THROW(classical::sample_trajectory(aa, 0, 0.0, {0.3}, 1.0, 1e-3), PreconditionError);
}

TEST(Trajectory, StartAngleShiftsThePhase) {
  const auto aa = classical::build_action_angle(whole_harmonic(), {{0.5, 0}});
  const auto tr = classical::sample_trajectory(aa, 0, 1.2, {}, 0.0, 1e-3);
  EXPECT_NEAR(tr.states[0][0], std::sin(1.2), 1e-9);
  EXPECT_NEAR(tr.states[0][1], std::cos(1.2), 1e-9);
}

TEST(Trajectory, FlagsLeavingTheChart) {
  const Chart c = chart_of(dynamics::harmonic(), Predicate::half_plane({1.0, 0.0}, -0.5));
  const auto tr = classical::integrate_trajectory(c.system, {0.0, 1.0}, 5.0, 1e-3, c.constants, &c);
  EXPECT_TRUE(tr.exited_chart);
  EXPECT_THROW(classical::integrate_trajectory(c.system, {0.0}, 1.0, 1e-3), StructuralError);
}

TEST(Trajectory, HenonHeilesConservesEnergy) {
  const auto sys = dynamics::henon_heiles(1.0);
  const auto tr = classical::integrate_trajectory(sys, {0.1, 0.0, 0.0, 0.35}, 100.0, 2e-3);
  EXPECT_LT(tr.energy_drift, 1e-8);
}

TEST(Density, SingleLevelMatchesTheSmearedDeltaFormula) {
  const auto g = wigner::PhaseGrid::make(-4, 4, 128, -4, 4, 128);
  const std::vector<classical::ActionAngleChart> aa{classical::build_action_angle(whole_harmonic(), {{1.0, 0}})};
  const double sigma = 0.25;
  const auto d = classical::classical_density({{0, 0, 1.0}}, aa, g, sigma);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double e = 0.5 * (g.q(k) * g.q(k) + g.p(j) * g.p(j)) - 1.0;
      const double ref = std::exp(-0.5 * e * e / (sigma * sigma)) / (sigma * std::sqrt(2 * kPi)) / (2 * kPi);
      worst = std::max(worst, std::abs(d.field.at(k, j).real() - ref));
    }
  EXPECT_LT(worst, 1e-9);
  EXPECT_NEAR(d.integral, 1.0, 1e-3);
  EXPECT_GE(d.min_value, 0.0);
}

TEST(Density, MassOffTheThreeWidthBandIsSmall) {
  const auto g = wigner::PhaseGrid::make(-4, 4, 256, -4, 4, 256);
  const std::vector<classical::ActionAngleChart> aa{classical::build_action_angle(whole_harmonic(), {{1.0, 0}})};
  const auto d = classical::classical_density({{0, 0, 1.0}}, aa, g, 0.0);
  double off = 0.0, all = 0.0;
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double e = 0.5 * (g.q(k) * g.q(k) + g.p(j) * g.p(j));
      const double v = d.field.at(k, j).real();
      all += v;
      if (std::abs(e - 1.0) > 3 * d.smearing) off += v;
    }
  // Gaussian mass beyond 3 sigma is 2.7e-3; the band test in the area measure is the same.
  EXPECT_LT(off / all, 3e-3);
  EXPECT_LT(classical::angular_nonuniformity(d, aa[0], 0), 1e-3);
}

TEST(Density, RejectsBadWeightsAndNarrowSmearing) {
  const auto g = wigner::PhaseGrid::make(-4, 4, 64, -4, 4, 64);
  const std::vector<classical::ActionAngleChart> aa{classical::build_action_angle(whole_harmonic(), {{1.0, 0}, {2.0, 0}})};
  EXPECT_THROW(classical::classical_density({{0, 0, 0.5}}, aa, g, 0.5), PreconditionError);
  EXPECT_THROW(classical::classical_density({{0, 0, 1.5}, {0, 1, -0.5}}, aa, g, 0.5), PreconditionError);
  EXPECT_THROW(classical::classical_density({{0, 0, 1.0}}, aa, g, 1e-3), PreconditionError);
  EXPECT_THROW(classical::classical_density({{3, 0, 1.0}}, aa, g, 0.5), StructuralError);
}

TEST(Decohered, UniformWeightsOnOneToTwoGiveMeanEnergyOneAndAHalf) {
  const auto eg = spectral::EnergyGrid::make(1.0, 2.0, 21);
  const spectral::VanHoveState st{kernels::flat_singular(eg, 1, 1.0, 2.0), 1.0};
  const auto g = wigner::PhaseGrid::make(-4, 4, 256, -4, 4, 256);
  const auto res = classical::decohered_to_classical(st, {{0}}, {whole_harmonic()}, g, 0.0);
  const auto energy = spectral::VanHoveObservable{kernels::energy_singular(eg, 1)};
  EXPECT_NEAR(classical::spectral_pairing(st, energy), 1.5, 1e-12);
  const double phase = classical::phase_pairing(res.density, whole_harmonic().system, [](double e) { return e; });
  EXPECT_NEAR(phase / 1.5, 1.0, 1e-3);
  EXPECT_NEAR(res.density.integral, 1.0, 1e-3);
}

TEST(Decohered, RequiresADecoheredDiagonalState) {
  const auto eg = spectral::EnergyGrid::make(1.0, 2.0, 5);
  const auto g = wigner::PhaseGrid::make(-4, 4, 64, -4, 4, 64);
  auto k = kernels::flat_singular(eg, 2, 1.0, 2.0);
  k.reg(1, 2, 0, 0) = 0.1;
  EXPECT_THROW(classical::decohered_to_classical({k, 1.0}, {{0, 0}}, {whole_harmonic()}, g, 0.0), PreconditionError);
  k.reg(1, 2, 0, 0) = 0.0;
  k.sing(1, 0, 1) = k.sing(1, 1, 0) = 0.05;
  EXPECT_THROW(classical::decohered_to_classical({k, 1.0}, {{0, 0}}, {whole_harmonic()}, g, 0.0), PreconditionError);
}

TEST(FlowInvariance, LevelDensityIsInvariantAndAGenericFieldIsNot) {
  const auto g = wigner::PhaseGrid::make(-4, 4, 256, -4, 4, 256);
  const std::vector<classical::ActionAngleChart> aa{classical::build_action_angle(whole_harmonic(), {{1.0, 0}})};
  const auto d = classical::classical_density({{0, 0, 1.0}}, aa, g, 0.0);
  const auto sys = dynamics::harmonic();
  EXPECT_LT(classical::density_flow_invariance(d, sys, 1.0), 1e-2);
  const auto shifted = wigner::PhaseSpaceField::sample(g, 1.0, [](double q, double p) {
    return std::exp(-((q - 1) * (q - 1) + p * p));
  });
  EXPECT_GT(classical::density_flow_invariance(shifted, sys, 1.0), 0.5);
}
