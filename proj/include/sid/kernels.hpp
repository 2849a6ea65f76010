#pragma once

// Named kernel generators used by scenarios and tests.

#include <cmath>
#include <vector>

#include "sid/spectral.hpp"

namespace sid::kernels {

using spectral::EnergyGrid;
using spectral::SpectralKernel;

/// C-infinity plateau: 0 below lo, 1 on [lo + ramp, hi - ramp], 0 above hi.
struct SmoothWindow {
  double lo = 0.0;
  double hi = 1.0;
  double ramp = 0.5;

  static double step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / x);
    const double b = std::exp(-1.0 / (1.0 - x));
    return a / (a + b);
  }

  double operator()(double w) const {
    if (ramp <= 0.0) return (w >= lo && w <= hi) ? 1.0 : 0.0;
    return step((w - lo) / ramp) * step((hi - w) / ramp);
  }
};

/// exp(-beta w)/Z on every channel diagonal, with Z fixed by the same
/// trapezoid rule used for the trace so the state is exactly normalized.
inline SpectralKernel thermal_singular(const EnergyGrid& grid, std::size_t channels, double beta) {
  auto k = SpectralKernel::zeros(grid, channels);
  const auto nodes = grid.nodes();
  const auto w = grid.weights();
  double z = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) z += w[i] * std::exp(-beta * (nodes[i] - grid.omega_min));
  z *= static_cast<double>(channels);
  for (std::size_t i = 0; i < grid.n_points; ++i)
    for (std::size_t m = 0; m < channels; ++m) k.sing(i, m, m) = std::exp(-beta * (nodes[i] - grid.omega_min)) / z;
  return k;
}

/// Uniform population on the grid nodes inside [lo, hi], normalized.
inline SpectralKernel flat_singular(const EnergyGrid& grid, std::size_t channels, double lo, double hi) {
  auto k = SpectralKernel::zeros(grid, channels);
  const auto nodes = grid.nodes();
  const double eps = 1e-12 * std::max(1.0, grid.omega_max);
  std::vector<double> g(grid.n_points, 0.0);
  for (std::size_t i = 0; i < grid.n_points; ++i) g[i] = (nodes[i] >= lo - eps && nodes[i] <= hi + eps) ? 1.0 : 0.0;
  const auto w = grid.weights();
  double z = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) z += w[i] * g[i];
  if (z == 0.0) throw PreconditionError("flat_singular: window contains no grid node");
  z *= static_cast<double>(channels);
  for (std::size_t i = 0; i < grid.n_points; ++i)
    for (std::size_t m = 0; m < channels; ++m) k.sing(i, m, m) = g[i] / z;
  return k;
}

/// Regular part A f(w - w') W((w + w')/2) delta_{mm'} for a profile f of the
/// energy difference. The window acts on the mean energy so the profile in
/// nu = w - w' is not distorted.
template <class Profile>
SpectralKernel regular_from_profile(const EnergyGrid& grid, std::size_t channels, double amplitude,
                                    const SmoothWindow& window, Profile&& profile) {
  auto k = SpectralKernel::zeros(grid, channels);
  const auto nodes = grid.nodes();
  for (std::size_t i = 0; i < grid.n_points; ++i)
    for (std::size_t j = 0; j < grid.n_points; ++j) {
      const double v = amplitude * profile(nodes[i] - nodes[j]) * window(0.5 * (nodes[i] + nodes[j]));
      if (v == 0.0) continue;
      for (std::size_t m = 0; m < channels; ++m) k.reg(i, j, m, m) = v;
    }
  return k;
}

inline SpectralKernel gaussian_nu_regular(const EnergyGrid& grid, std::size_t channels, double sigma,
                                          double amplitude, const SmoothWindow& window) {
  return regular_from_profile(grid, channels, amplitude, window,
                              [sigma](double nu) { return std::exp(-nu * nu / (2.0 * sigma * sigma)); });
}

/// (1 - (nu/a)^2)^2 on |nu| < a: continuously differentiable, with a jump in
/// the second derivative at the support edge.
inline double c1_bump(double nu, double a) {
  const double x = nu / a;
  if (std::abs(x) >= 1.0) return 0.0;
  const double s = 1.0 - x * x;
  return s * s;
}

inline SpectralKernel c1_compact_regular(const EnergyGrid& grid, std::size_t channels, double half_width,
                                         double amplitude, const SmoothWindow& window) {
  return regular_from_profile(grid, channels, amplitude, window,
                              [half_width](double nu) { return c1_bump(nu, half_width); });
}

/// Adds the parts of `b` into `a` (same grid/channels).
inline SpectralKernel combine(SpectralKernel a, const SpectralKernel& b) {
  if (!(a.grid == b.grid) || a.n_channels != b.n_channels) throw StructuralError("combine: kernel shapes differ");
  for (std::size_t i = 0; i < a.singular.size(); ++i) a.singular[i] += b.singular[i];
  for (std::size_t i = 0; i < a.regular.size(); ++i) a.regular[i] += b.regular[i];
  return a;
}

// Observables.

/// Singular O(w)_{mm'} = f(w) delta_{mm'}.
template <class Fn>
SpectralKernel diagonal_singular(const EnergyGrid& grid, std::size_t channels, Fn&& f) {
  auto k = SpectralKernel::zeros(grid, channels);
  const auto nodes = grid.nodes();
  for (std::size_t i = 0; i < grid.n_points; ++i)
    for (std::size_t m = 0; m < channels; ++m) k.sing(i, m, m) = f(nodes[i]);
  return k;
}

inline SpectralKernel energy_singular(const EnergyGrid& grid, std::size_t channels) {
  return diagonal_singular(grid, channels, [](double w) { return w; });
}

inline SpectralKernel identity_singular(const EnergyGrid& grid, std::size_t channels) {
  return diagonal_singular(grid, channels, [](double) { return 1.0; });
}

/// Regular O(w, w')_{mm'} = value delta_{mm'} on the whole grid square.
inline SpectralKernel flat_regular(const EnergyGrid& grid, std::size_t channels, double value) {
  auto k = SpectralKernel::zeros(grid, channels);
  for (std::size_t i = 0; i < grid.n_points; ++i)
    for (std::size_t j = 0; j < grid.n_points; ++j)
      for (std::size_t m = 0; m < channels; ++m) k.reg(i, j, m, m) = value;
  return k;
}

}  // namespace sid::kernels
