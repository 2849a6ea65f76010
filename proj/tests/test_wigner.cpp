#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sid/wigner.hpp"

using namespace sid;
using wigner::DiffScheme;
using wigner::OperatorKernel;
using wigner::PhaseGrid;
using wigner::PhaseSpaceField;

namespace {

// Normalized Gaussian wave packet sampled on the position nodes.
std::vector<Complex> packet(const OperatorKernel& shape, double hbar, double q0, double p0) {
  std::vector<Complex> psi(shape.n);
  for (std::size_t a = 0; a < shape.n; ++a) {
    const double x = shape.x(a);
    psi[a] = std::pow(kPi * hbar, -0.25) * std::exp(-(x - q0) * (x - q0) / (2 * hbar)) * std::polar(1.0, p0 * x / hbar);
  }
  return psi;
}

// Grid with h = 0.125 that contains q = 0 as a node.
constexpr double kQmin = -12.0, kQmax = 11.875;
constexpr std::size_t kN = 192;

// Periodic grid on [-pi, pi): spectral derivatives of trigonometric fields are exact.
PhaseGrid periodic_grid(std::size_t n) {
  const double top = -kPi + static_cast<double>(n - 1) * 2.0 * kPi / static_cast<double>(n);
  return PhaseGrid::make(-kPi, top, n, -kPi, top, n);
}

}  // namespace

TEST(PhaseGrid, DualSpacing) {
  const auto g = PhaseGrid::dual(-4.0, 4.0, 64, 0.5);
  const double h = 8.0 / 63.0;
  EXPECT_NEAR(g.dp(), 2 * kPi * 0.5 / (64 * h), 1e-13);
  EXPECT_NEAR(g.p(32), 0.0, 1e-13);
  EXPECT_TRUE(g.is_dual(0.5));
  EXPECT_FALSE(g.is_dual(1.0));
  EXPECT_THROW(PhaseGrid::make(0, 1, 5, 0, 1, 6), PreconditionError);
}

TEST(WignerTransform, IdentityHasUnitSymbol) {
  const auto f = wigner::wigner_transform(OperatorKernel::identity(-5.0, 5.0, 64), 1.0);
  for (const auto& z : f.values) EXPECT_NEAR(std::abs(z - 1.0), 0.0, 1e-12);
}

TEST(WignerTransform, GroundStateIsTheGaussian) {
  for (double hbar : {1.0, 0.6}) {
    const auto shape = OperatorKernel::zeros(kQmin, kQmax, kN);
    const auto rho = OperatorKernel::projector(kQmin, kQmax, packet(shape, hbar, 0.0, 0.0));
    const auto w = wigner::to_state_symbol(wigner::wigner_transform(rho, hbar));
    double worst = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < w.grid.n_q; ++k)
      for (std::size_t j = 0; j < w.grid.n_p; ++j) {
        const double q = w.grid.q(k), p = w.grid.p(j);
        worst = std::max(worst, std::abs(w.at(k, j) - std::exp(-(q * q + p * p) / hbar) / (kPi * hbar)));
        peak = std::max(peak, w.at(k, j).real());
      }
    EXPECT_LT(worst, 1e-12) << "hbar = " << hbar;
    EXPECT_NEAR(peak, 1.0 / (kPi * hbar), 1e-12);
  }
}

TEST(WignerTransform, CoherentStateSitsAtItsPhasePoint) {
  const double hbar = 1.0, q0 = 1.5, p0 = -0.75;
  const auto shape = OperatorKernel::zeros(kQmin, kQmax, kN);
  const auto w = wigner::to_state_symbol(
      wigner::wigner_transform(OperatorKernel::projector(kQmin, kQmax, packet(shape, hbar, q0, p0)), hbar));
  double worst = 0.0;
  for (std::size_t k = 0; k < w.grid.n_q; ++k)
    for (std::size_t j = 0; j < w.grid.n_p; ++j) {
      const double dq = w.grid.q(k) - q0, dp = w.grid.p(j) - p0;
      worst = std::max(worst, std::abs(w.at(k, j) - std::exp(-(dq * dq + dp * dp) / hbar) / kPi));
    }
  EXPECT_LT(worst, 1e-12);
}

TEST(WignerTransform, WideKernelIsRejected) {
  const auto shape = OperatorKernel::zeros(-4.0, 4.0, 64);
  const auto rho = OperatorKernel::projector(-4.0, 4.0, packet(shape, 1.0, 0.0, 0.0));
  EXPECT_THROW(wigner::wigner_transform(rho, 1.0), NumericalError);
}

TEST(Pairing, GroundStateEnergyIsOneHalf) {
  const auto shape = OperatorKernel::zeros(kQmin, kQmax, kN);
  const auto rho = wigner::to_state_symbol(
      wigner::wigner_transform(OperatorKernel::projector(kQmin, kQmax, packet(shape, 1.0, 0.0, 0.0)), 1.0));
  const auto h = PhaseSpaceField::sample(rho.grid, 1.0, [](double q, double p) { return 0.5 * (q * q + p * p); });
  const auto one = PhaseSpaceField::sample(rho.grid, 1.0, [](double, double) { return 1.0; });
  EXPECT_NEAR(wigner::pairing(rho, h), 0.5, 1e-10);
  EXPECT_NEAR(wigner::pairing(rho, one), 1.0, 1e-12);
}

TEST(Pairing, MatchesTheKernelTrace) {
  // Tr(rho X^2) for a displaced packet is q0^2 + hbar / 2.
  const double hbar = 0.8, q0 = 0.9;
  const auto shape = OperatorKernel::zeros(kQmin, kQmax, kN);
  const auto rho_k = OperatorKernel::projector(kQmin, kQmax, packet(shape, hbar, q0, 0.3));
  auto x2 = OperatorKernel::zeros(kQmin, kQmax, kN);
  for (std::size_t a = 0; a < kN; ++a) x2.at(a, a) = x2.x(a) * x2.x(a) / x2.h();
  const double trace = wigner::kernel_trace_product(rho_k, x2).real();
  const auto rho = wigner::to_state_symbol(wigner::wigner_transform(rho_k, hbar));
  const auto sym = PhaseSpaceField::sample(rho.grid, hbar, [](double q, double) { return q * q; });
  EXPECT_NEAR(trace, q0 * q0 + hbar / 2, 1e-10);
  EXPECT_NEAR(wigner::pairing(rho, sym), trace, 1e-10);
}

TEST(WeylQuantize, InvertsTheTransform) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const double hbar = 1.0;
  auto k = OperatorKernel::zeros(kQmin, kQmax, kN);
  const auto a = packet(k, hbar, u(rng), u(rng)), b = packet(k, hbar, u(rng), u(rng));
  for (std::size_t i = 0; i < kN; ++i)
    for (std::size_t j = 0; j < kN; ++j) k.at(i, j) = 0.3 * a[i] * std::conj(b[j]) + 0.7 * b[i] * std::conj(a[j]);
  const auto back = wigner::weyl_quantize(wigner::wigner_transform(k, hbar));
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < k.values.size(); ++i) {
    worst = std::max(worst, std::abs(back.values[i] - k.values[i]));
    scale = std::max(scale, std::abs(k.values[i]));
  }
  EXPECT_LT(worst, 1e-12 * scale);
}

TEST(WeylQuantize, RejectsANonDualGrid) {
  const auto f = PhaseSpaceField::zeros(PhaseGrid::make(-1, 1, 8, -1, 1, 8), 1.0);
  EXPECT_THROW(wigner::weyl_quantize(f), PreconditionError);
}

TEST(Derivative, SpectralIsExactOnPeriodicGrid) {
  const auto g = periodic_grid(32);
  const auto f = PhaseSpaceField::sample(g, 1.0, [](double q, double p) { return std::sin(2 * q) * std::cos(p); });
  const auto d = wigner::derivative(f, 1, 2);
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j)
      EXPECT_NEAR(std::abs(d[k * g.n_p + j] + 2 * std::cos(2 * g.q(k)) * std::cos(g.p(j))), 0.0, 1e-12);
}

TEST(Derivative, Fd4IsExactOnQuartics) {
  const auto g = PhaseGrid::make(-1, 1, 16, -2, 2, 16);
  const auto f = PhaseSpaceField::sample(g, 1.0, [](double q, double p) { return q * q * q * q + p * p * p; },
                                         DiffScheme::FiniteDifference4);
  const auto dq = wigner::derivative(f, 1, 0), dp = wigner::derivative(f, 0, 1);
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j) {
      EXPECT_NEAR(dq[k * g.n_p + j].real(), 4 * std::pow(g.q(k), 3), 1e-10);
      EXPECT_NEAR(dp[k * g.n_p + j].real(), 3 * g.p(j) * g.p(j), 1e-10);
    }
}

TEST(StarProduct, TrigonometricSeriesTermByTerm) {
  // sin q * cos p = sum_k (i hbar/2)^k / k! sin^(k)(q) cos^(k)(p): only the j = 0 terms survive.
  const double hbar = 0.3;
  const auto g = periodic_grid(32);
  const auto f = PhaseSpaceField::sample(g, hbar, [](double q, double) { return std::sin(q); });
  const auto h = PhaseSpaceField::sample(g, hbar, [](double, double p) { return std::cos(p); });
  auto nth = [](double x, int k, bool sine) { return sine ? std::sin(x + k * kPi / 2) : std::cos(x + k * kPi / 2); };
  for (int order = 0; order <= 4; ++order) {
    const auto fg = wigner::star_product(f, h, order);
    double worst = 0.0;
    for (std::size_t k = 0; k < g.n_q; ++k)
      for (std::size_t j = 0; j < g.n_p; ++j) {
        Complex ref{};
        Complex c = 1.0;
        for (int n = 0; n <= order; ++n) {
          if (n > 0) c *= Complex(0.0, hbar / 2) / static_cast<double>(n);
          ref += c * nth(g.q(k), n, true) * nth(g.p(j), n, false);
        }
        worst = std::max(worst, std::abs(fg.at(k, j) - ref));
      }
    EXPECT_LT(worst, 1e-12) << "order " << order;
    EXPECT_EQ(fg.star_order, order);
  }
}

TEST(StarProduct, GaussianSquareApproachesTheExactProduct) {
  // exp(-a r^2) * exp(-a r^2) = exp(-2a r^2 / (1 + a^2 hbar^2)) / (1 + a^2 hbar^2), r^2 = q^2 + p^2.
  const double a = 0.5;
  const auto g = PhaseGrid::make(-10, 10, 128, -10, 10, 128);
  for (double hbar : {0.2, 0.1}) {
    const auto f = PhaseSpaceField::sample(g, hbar, [a](double q, double p) { return std::exp(-a * (q * q + p * p)); });
    const auto ff = wigner::star_product(f, f, 4);
    const double s = 1.0 + a * a * hbar * hbar;
    double worst = 0.0;
    for (std::size_t k = 0; k < g.n_q; ++k)
      for (std::size_t j = 0; j < g.n_p; ++j) {
        const double r2 = g.q(k) * g.q(k) + g.p(j) * g.p(j);
        worst = std::max(worst, std::abs(ff.at(k, j) - std::exp(-2 * a * r2 / s) / s));
      }
    // The truncation error is the hbar^6 term of the series.
    EXPECT_LT(worst, 5.0 * std::pow(a * hbar, 6)) << "hbar = " << hbar;
  }
}

TEST(Brackets, CanonicalPairFd4) {
  const auto g = PhaseGrid::make(-3, 3, 24, -3, 3, 24);
  const auto q = PhaseSpaceField::sample(g, 0.5, [](double x, double) { return x; }, DiffScheme::FiniteDifference4);
  const auto p = PhaseSpaceField::sample(g, 0.5, [](double, double y) { return y; }, DiffScheme::FiniteDifference4);
  for (const auto& f : {wigner::poisson_bracket(q, p), wigner::moyal_bracket(q, p, 2)})
    for (const auto& z : f.values) EXPECT_NEAR(std::abs(z - 1.0), 0.0, 1e-12);
}

TEST(Brackets, MoyalOfSinAndCosMatchesClosedForm) {
  // {sin q, cos p}_mb = -(2/hbar) sin(hbar/2) cos q sin p; the order-4 series keeps the hbar^2 term.
  const double hbar = 0.4;
  const auto g = periodic_grid(32);
  const auto f = PhaseSpaceField::sample(g, hbar, [](double q, double) { return std::sin(q); });
  const auto h = PhaseSpaceField::sample(g, hbar, [](double, double p) { return std::cos(p); });
  const auto mb = wigner::moyal_bracket(f, h, 4);
  const auto pb = wigner::poisson_bracket(f, h);
  const double x = hbar / 2, series = -(2 / hbar) * (x - x * x * x / 6);
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double cs = std::cos(g.q(k)) * std::sin(g.p(j));
      EXPECT_NEAR(std::abs(mb.at(k, j) - series * cs), 0.0, 1e-12);
      EXPECT_NEAR(std::abs(pb.at(k, j) + cs), 0.0, 1e-12);
    }
}

TEST(Brackets, MismatchedFieldsAreStructuralErrors) {
  const auto g = PhaseGrid::make(-1, 1, 8, -1, 1, 8);
  const auto a = PhaseSpaceField::zeros(g, 1.0);
  const auto b = PhaseSpaceField::zeros(g, 0.5);
  const auto c = PhaseSpaceField::zeros(g, 1.0, DiffScheme::FiniteDifference4);
  EXPECT_THROW(wigner::star_product(a, b, 2), StructuralError);
  EXPECT_THROW(wigner::poisson_bracket(a, c), StructuralError);
  EXPECT_THROW(wigner::star_product(a, a, 5), PreconditionError);
}
