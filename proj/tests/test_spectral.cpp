#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sid/kernels.hpp"
#include "sid/spectral.hpp"

using namespace sid;
using spectral::EnergyGrid;
using spectral::SpectralKernel;

namespace {

SpectralKernel random_hermitian(const EnergyGrid& g, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  auto k = SpectralKernel::zeros(g, c);
  for (std::size_t i = 0; i < g.n_points; ++i)
    for (std::size_t m = 0; m < c; ++m)
      for (std::size_t mp = m; mp < c; ++mp) {
        const Complex z{n(rng), m == mp ? 0.0 : n(rng)};
        k.sing(i, m, mp) = z;
        k.sing(i, mp, m) = std::conj(z);
      }
  for (std::size_t i = 0; i < g.n_points; ++i)
    for (std::size_t j = i; j < g.n_points; ++j)
      for (std::size_t m = 0; m < c; ++m)
        for (std::size_t mp = 0; mp < c; ++mp) {
          Complex z{n(rng), n(rng)};
          if (i == j && m == mp) z = {z.real(), 0.0};
          if (i == j && mp < m) continue;
          k.reg(i, j, m, mp) = z;
          k.reg(j, i, mp, m) = std::conj(z);
        }
  return k;
}

}  // namespace

TEST(EnergyGrid, SpacingNodesAndValidity) {
  const auto g = EnergyGrid::make(0.0, 10.0, 401);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.025);
  EXPECT_EQ(g.node(400), 10.0);
  EXPECT_DOUBLE_EQ(g.validity_limit(1.0), 10.0);
  EXPECT_DOUBLE_EQ(g.validity_limit(0.5), 5.0);
  EXPECT_THROW(EnergyGrid::make(-1.0, 1.0, 10), PreconditionError);
  EXPECT_THROW(EnergyGrid::make(1.0, 1.0, 10), PreconditionError);
  EXPECT_THROW(EnergyGrid::make(0.0, 1.0, 1), PreconditionError);
}

TEST(SpectralKernel, ShapeErrorsAreStructural) {
  auto k = SpectralKernel::zeros(EnergyGrid::make(0.0, 1.0, 5), 2);
  EXPECT_NO_THROW(k.check_shape());
  k.regular.pop_back();
  EXPECT_THROW(k.check_shape(), StructuralError);
  auto bad = SpectralKernel::zeros(EnergyGrid::make(0.0, 1.0, 5), 1);
  bad.singular[2] = Complex(std::nan(""), 0.0);
  EXPECT_THROW(bad.check_shape(), StructuralError);
}

TEST(Trace, ThermalMeanEnergyMatchesContinuum) {
  const auto g = EnergyGrid::make(0.0, 10.0, 401);
  const spectral::VanHoveState st{kernels::thermal_singular(g, 1, 1.0), 1.0};
  EXPECT_NEAR(spectral::trace(st.kernel), 1.0, 1e-14);
  const spectral::VanHoveObservable h{kernels::energy_singular(g, 1)};
  // Truncated exponential on [0, 10]: <w> = 1 - 10 e^{-10} / (1 - e^{-10}).
  const double exact = 1.0 - 10.0 * std::exp(-10.0) / (1.0 - std::exp(-10.0));
  EXPECT_NEAR(spectral::expectation_at_time(st, h, 3.0), exact, 1e-3);
}

TEST(Validate, NormalizedThermalPasses) {
  const auto g = EnergyGrid::make(0.0, 10.0, 201);
  EXPECT_TRUE(spectral::validate_state({kernels::thermal_singular(g, 3, 2.0), 1.0}).ok());
}

TEST(Validate, TraceNineTenthsIsANormalizationViolation) {
  const auto g = EnergyGrid::make(0.0, 10.0, 201);
  auto k = kernels::thermal_singular(g, 1, 1.0);
  for (auto& z : k.singular) z *= 0.9;
  const auto rep = spectral::validate_state({k, 1.0});
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].constraint, "normalization");
  EXPECT_NEAR(rep.violations[0].magnitude, 0.1, 1e-12);
}

TEST(Validate, AsymmetricRegularEntryIsLocated) {
  const auto g = EnergyGrid::make(0.0, 1.0, 11);
  auto k = kernels::flat_singular(g, 2, 0.0, 1.0);
  k.reg(3, 7, 0, 1) = {0.5, 0.0};
  const auto rep = spectral::validate_state({k, 1.0});
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.violations[0].constraint, "hermiticity");
  EXPECT_NE(rep.violations[0].location.find("w=3, w'=7"), std::string::npos);
  EXPECT_NEAR(rep.violations[0].magnitude, 0.5, 1e-15);
}

TEST(Validate, NegativePopulationIsAPositivityViolation) {
  const auto g = EnergyGrid::make(0.0, 1.0, 11);
  auto k = kernels::flat_singular(g, 2, 0.0, 1.0);
  const Complex v = k.sing(4, 1, 1);
  k.sing(4, 1, 1) = -0.25;
  k.sing(5, 1, 1) += v + 0.25;  // equal interior weights: the trace stays 1 so only positivity fails
  const auto rep = spectral::validate_state({k, 1.0});
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].constraint, "positivity");
}

TEST(Expectation, RegularPartMatchesBruteForceDoubleSum) {
  const auto g = EnergyGrid::make(0.5, 3.0, 9);
  const auto rho = random_hermitian(g, 2, 1);
  const auto obs = random_hermitian(g, 2, 2);
  const double hbar = 0.7;
  const auto w = g.weights();
  for (double t : {0.0, 0.3, 1.7, -2.2}) {
    Complex ref{};
    for (std::size_t i = 0; i < g.n_points; ++i)
      for (std::size_t j = 0; j < g.n_points; ++j)
        for (std::size_t m = 0; m < 2; ++m)
          for (std::size_t mp = 0; mp < 2; ++mp)
            ref += w[i] * w[j] * std::conj(rho.reg(i, j, m, mp)) * obs.reg(i, j, m, mp) *
                   std::exp(Complex(0.0, (g.node(i) - g.node(j)) * t / hbar));
    const auto parts = spectral::expectation_parts({rho, hbar}, {obs}, t);
    EXPECT_NEAR(std::abs(parts.regular - ref), 0.0, 1e-12 * std::max(1.0, std::abs(ref))) << "t = " << t;
    EXPECT_NEAR(parts.regular.imag(), 0.0, 1e-12);
  }
}

TEST(Expectation, GaussianCoherenceDecaysAsGaussianInTime) {
  // Fourier transform of exp(-nu^2 / 2 s^2) over nu, times the mean-energy window area.
  const auto g = EnergyGrid::make(0.0, 10.0, 401);
  const double sigma = 0.3, hbar = 0.5, amp = 1e-3;
  const kernels::SmoothWindow win{1.5, 8.5, 1.0};
  auto rho = kernels::combine(kernels::thermal_singular(g, 1, 1.0), kernels::gaussian_nu_regular(g, 1, sigma, amp, win));
  const spectral::VanHoveObservable obs{kernels::flat_regular(g, 1, 1.0)};
  const double area = win.hi - win.lo - win.ramp;
  for (double t = 0.0; t <= g.validity_limit(hbar); t += 0.25) {
    const double exact = amp * area * sigma * std::sqrt(2.0 * kPi) * std::exp(-sigma * sigma * t * t / (2 * hbar * hbar));
    const auto r = spectral::expectation_parts({rho, hbar}, obs, t).regular;
    EXPECT_NEAR(r.real(), exact, 1e-6 * exact) << "t = " << t;
  }
}

TEST(Expectation, SingularPartIsTimeIndependent) {
  const auto g = EnergyGrid::make(0.0, 4.0, 41);
  const auto rho = random_hermitian(g, 3, 5);
  const auto obs = random_hermitian(g, 3, 6);
  const double s0 = spectral::expectation_parts({rho, 1.0}, {obs}, 0.0).singular;
  for (double t : {0.5, 5.0, 50.0}) EXPECT_EQ(spectral::expectation_parts({rho, 1.0}, {obs}, t).singular, s0);
}

TEST(Expectation, IncompatibleKernelsAreRejected) {
  const auto a = kernels::flat_singular(EnergyGrid::make(0.0, 1.0, 11), 1, 0.0, 1.0);
  const auto b = kernels::energy_singular(EnergyGrid::make(0.0, 1.0, 12), 1);
  const auto c = kernels::energy_singular(EnergyGrid::make(0.0, 1.0, 11), 2);
  EXPECT_THROW(spectral::expectation_parts({a, 1.0}, {b}, 0.0), StructuralError);
  EXPECT_THROW(spectral::expectation_parts({a, 1.0}, {c}, 0.0), StructuralError);
}

TEST(DecayCurve, FlagsTimesBeyondTheValidityLimit) {
  const auto g = EnergyGrid::make(0.0, 1.0, 11);  // validity limit 2.5 at hbar = 1
  const spectral::VanHoveState st{kernels::flat_singular(g, 1, 0.0, 1.0), 1.0};
  const spectral::VanHoveObservable obs{kernels::energy_singular(g, 1)};
  EXPECT_FALSE(spectral::decay_curve(st, obs, {0.0, 1.0, 2.5}).beyond_validity);
  const auto c = spectral::decay_curve(st, obs, {0.0, 1.0, 3.0});
  EXPECT_TRUE(c.beyond_validity);
  EXPECT_DOUBLE_EQ(c.validity_limit, 2.5);
  EXPECT_THROW(spectral::decay_curve(st, obs, {1.0, 1.0}), PreconditionError);
  EXPECT_THROW(spectral::decay_curve(st, obs, {}), PreconditionError);
}

TEST(DecayCurve, RiemannLebesgueSmallAtTheValidityLimit) {
  const auto g = EnergyGrid::make(0.0, 10.0, 401);
  auto rho = kernels::combine(kernels::thermal_singular(g, 1, 1.0),
                              kernels::gaussian_nu_regular(g, 1, 0.5, 1e-3, {1.0, 9.0, 2.0}));
  const spectral::VanHoveObservable obs{kernels::flat_regular(g, 1, 1.0)};
  const auto c = spectral::decay_curve({rho, 1.0}, obs, {0.0, 10.0});
  // exp(-sigma^2 t^2 / 2) = exp(-12.5) at t = 10
  EXPECT_NEAR(std::abs(c.rows[1].regular) / std::abs(c.rows[0].regular), std::exp(-12.5), 1e-9);
}

TEST(WeakLimit, DropsRegularKeepsSingular) {
  const auto g = EnergyGrid::make(0.0, 2.0, 7);
  const auto k = random_hermitian(g, 2, 9);
  const auto w = spectral::weak_limit({k, 1.0});
  EXPECT_TRUE(w.kernel.regular_is_zero());
  EXPECT_EQ(w.kernel.singular, k.singular);
}

TEST(PointerBasis, TwoByTwoBlockMatchesClosedForm) {
  const auto g = EnergyGrid::make(0.0, 1.0, 2);
  auto k = SpectralKernel::zeros(g, 2);
  const double a = 0.7, d = 0.2;
  const Complex b{0.1, -0.3};
  for (std::size_t i = 0; i < 2; ++i) {
    k.sing(i, 0, 0) = a;
    k.sing(i, 1, 1) = d;
    k.sing(i, 0, 1) = b;
    k.sing(i, 1, 0) = std::conj(b);
  }
  const auto basis = spectral::pointer_basis({k, 1.0});
  const double mid = 0.5 * (a + d), rad = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
  EXPECT_NEAR(basis.eigenvalue(0, 0), mid + rad, 1e-14);
  EXPECT_NEAR(basis.eigenvalue(0, 1), mid - rad, 1e-14);
  const auto rotated = spectral::apply_pointer_basis({k, 1.0}, basis);
  EXPECT_LT(spectral::max_offdiagonal(rotated.kernel), 1e-14);
  EXPECT_NEAR(rotated.kernel.sing(1, 0, 0).real(), mid + rad, 1e-14);
  EXPECT_NEAR(spectral::trace(rotated.kernel), spectral::trace(k), 1e-14);
}

TEST(PointerBasis, ReconstructsRandomBlocks) {
  const auto g = EnergyGrid::make(0.0, 1.0, 4);
  for (std::size_t c : {1u, 3u, 8u}) {
    auto k = random_hermitian(g, c, 100 + c);
    const auto basis = spectral::pointer_basis({k, 1.0});
    EXPECT_LT(basis.max_reconstruction_error, 1e-12);
    EXPECT_LT(basis.max_unitarity_error, 1e-12);
    for (std::size_t i = 0; i < g.n_points; ++i)
      for (std::size_t p = 1; p < c; ++p) EXPECT_GE(basis.eigenvalue(i, p - 1), basis.eigenvalue(i, p));
  }
}

TEST(PointerBasis, DegenerateBlockStaysNearTheInputBasis) {
  const auto g = EnergyGrid::make(0.0, 1.0, 3);
  auto k = SpectralKernel::zeros(g, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t m = 0; m < 3; ++m) k.sing(i, m, m) = 1.0 / 3.0;
  const auto basis = spectral::pointer_basis({k, 1.0});
  const auto rotated = spectral::apply_pointer_basis({k, 1.0}, basis);
  EXPECT_LT(spectral::max_offdiagonal(rotated.kernel), 1e-15);
  EXPECT_LT(basis.max_unitarity_error, 1e-14);
}
