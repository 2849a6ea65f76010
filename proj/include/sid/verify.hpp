#pragma once

// Property suites run by `sid verify` and the acceptance binary. Every suite
// is deterministic for a given seed and compares against oracles computed
// independently of the code under test (closed forms, direct operator
// application, plain-loop linear algebra).

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sid/charts.hpp"
#include "sid/classical.hpp"
#include "sid/fft.hpp"
#include "sid/kernels.hpp"
#include "sid/spectral.hpp"
#include "sid/wigner.hpp"

namespace sid::verify {

struct Check {
  std::string name;
  double measured = 0.0;
  std::string relation;  // "<", "<=", ">", ">=", "in"
  double bound = 0.0;
  double bound_hi = 0.0;  // upper end for "in"
  bool pass = false;
};

inline Check below(std::string name, double v, double bound) {
  return {std::move(name), v, "<", bound, 0.0, v < bound};
}
inline Check at_most(std::string name, double v, double bound) {
  return {std::move(name), v, "<=", bound, 0.0, v <= bound};
}
inline Check above(std::string name, double v, double bound) {
  return {std::move(name), v, ">", bound, 0.0, v > bound};
}
inline Check at_least(std::string name, double v, double bound) {
  return {std::move(name), v, ">=", bound, 0.0, v >= bound};
}
inline Check within(std::string name, double v, double lo, double hi) {
  return {std::move(name), v, "in", lo, hi, v >= lo && v <= hi};
}

struct Suite {
  std::string name;
  std::vector<Check> checks;
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }
};

// ---------------------------------------------------------------------------
// Spectral decay

/// Plateau [1, 9] with ramps of 2 on the [0, 10] grid; its integral is
/// hi - lo - ramp because the two ramp halves are complementary.
inline kernels::SmoothWindow decay_window() { return {1.0, 9.0, 2.0}; }

struct DecaySetup {
  spectral::VanHoveState state;
  spectral::VanHoveObservable observable;
};

inline DecaySetup decay_setup(const spectral::SpectralKernel& regular) {
  const auto grid = regular.grid;
  auto rho = kernels::combine(kernels::thermal_singular(grid, 1, 1.0), regular);
  auto obs = kernels::combine(kernels::energy_singular(grid, 1), kernels::flat_regular(grid, 1, 1.0));
  return {{rho, 1.0}, {obs}};
}

/// Gaussian-in-nu regular kernel: R(t) against A sigma sqrt(2 pi) |W| exp(-sigma^2 t^2 / 2 hbar^2).
inline Suite decay_gaussian() {
  const double sigma = 0.2, hbar = 1.0, amplitude = 1e-3;
  const auto grid = spectral::EnergyGrid::make(0.0, 10.0, 401);
  const auto win = decay_window();
  auto setup = decay_setup(kernels::gaussian_nu_regular(grid, 1, sigma, amplitude, win));
  setup.state.hbar = hbar;
  const double window_area = win.hi - win.lo - win.ramp;
  double worst = 0.0, singular_spread = 0.0;
  double s0 = 0.0;
  for (int k = 0; k <= 150; ++k) {
    const double t = 0.1 * k;
    const auto parts = spectral::expectation_parts(setup.state, setup.observable, t);
    const double oracle = amplitude * window_area * sigma * std::sqrt(2.0 * kPi) *
                          std::exp(-sigma * sigma * t * t / (2.0 * hbar * hbar));
    worst = std::max(worst, std::abs(parts.regular - oracle) / oracle);
    if (k == 0) s0 = parts.singular;
    singular_spread = std::max(singular_spread, std::abs(parts.singular - s0));
  }
  return {"decay_gaussian",
          {below("regular part vs exp(-s^2 t^2/2), max relative error, t in [0,15]", worst, 1e-3),
           below("singular part variation", singular_spread, 1e-12)}};
}

/// Envelope slope of log|R| vs log t over [t_v/10, t_v], t_v the validity
/// limit: maxima of |R| in ten log-spaced bins, then a least-squares line.
inline double envelope_slope(const std::function<double(double)>& magnitude, double t_lo, double t_hi,
                             int bins = 10, int per_bin = 200) {
  std::vector<double> lx, ly;
  for (int b = 0; b < bins; ++b) {
    const double a = t_lo * std::pow(t_hi / t_lo, static_cast<double>(b) / bins);
    const double z = t_lo * std::pow(t_hi / t_lo, static_cast<double>(b + 1) / bins);
    double best = -1.0, at = a;
    for (int i = 0; i <= per_bin; ++i) {
      const double t = a + (z - a) * i / per_bin;
      const double m = magnitude(t);
      if (m > best) {
        best = m;
        at = t;
      }
    }
    lx.push_back(std::log(at));
    ly.push_back(std::log(best));
  }
  return fit_line(lx, ly).slope;
}

inline Suite decay_c1() {
  const auto grid = spectral::EnergyGrid::make(0.0, 10.0, 401);
  auto setup = decay_setup(kernels::c1_compact_regular(grid, 1, 1.0, 1e-3, decay_window()));
  const double tv = grid.validity_limit(setup.state.hbar);
  const double slope = envelope_slope(
      [&](double t) { return std::abs(spectral::expectation_parts(setup.state, setup.observable, t).regular); },
      tv / 10.0, tv);
  return {"decay_c1", {at_most("log-log envelope slope of |R(t)| over the last resolved decade", slope, -0.85)}};
}

// ---------------------------------------------------------------------------
// Star product and brackets

inline double l2_norm(const wigner::PhaseSpaceField& f) {
  auto conj = f;
  for (auto& z : conj.values) z = std::conj(z);
  return std::sqrt(std::abs(wigner::pairing(f, conj)));
}

struct HbarSlopes {
  double star = 0.0;
  double bracket = 0.0;
  std::vector<double> hbars, star_norms, bracket_norms;
};

inline HbarSlopes hbar_slopes() {
  const auto g = wigner::PhaseGrid::make(-8.0, 8.0, 128, -8.0, 8.0, 128);
  HbarSlopes out;
  out.hbars = {0.1, 0.05, 0.025, 0.0125};
  std::vector<double> lx, ls, lb;
  for (double hb : out.hbars) {
    const auto f = wigner::PhaseSpaceField::sample(
        g, hb, [](double q, double p) { return std::exp(-((q - 0.3) * (q - 0.3) + p * p) / 2.0); });
    const auto h = wigner::PhaseSpaceField::sample(g, hb, [](double q, double p) {
      return std::exp(-(q * q + (p - 0.4) * (p - 0.4)) / 1.5) * std::cos(0.5 * q);
    });
    auto star = wigner::star_product(f, h, wigner::kMaxStarOrder);
    for (std::size_t i = 0; i < star.values.size(); ++i) star.values[i] -= f.values[i] * h.values[i];
    auto mb = wigner::moyal_bracket(f, h, wigner::kMaxStarOrder);
    const auto pb = wigner::poisson_bracket(f, h);
    for (std::size_t i = 0; i < mb.values.size(); ++i) mb.values[i] -= pb.values[i];
    out.star_norms.push_back(l2_norm(star));
    out.bracket_norms.push_back(l2_norm(mb));
    lx.push_back(std::log(hb));
    ls.push_back(std::log(out.star_norms.back()));
    lb.push_back(std::log(out.bracket_norms.back()));
  }
  out.star = fit_line(lx, ls).slope;
  out.bracket = fit_line(lx, lb).slope;
  return out;
}

inline Suite hbar_slope_suite() {
  const auto s = hbar_slopes();
  return {"hbar_slopes",
          {within("hbar-slope of |f*g - fg|", s.star, 0.9, 1.1),
           within("hbar-slope of |{f,g}_mb - {f,g}_pb|", s.bracket, 1.9, 2.1)}};
}

// ---------------------------------------------------------------------------
// Pairing against operator traces

struct GaussianState {
  double x0, p0, s;  // centre, momentum, position width
};

inline std::vector<Complex> gaussian_samples(const GaussianState& st, double q_min, double q_max, std::size_t n,
                                             double hbar) {
  const double h = (q_max - q_min) / static_cast<double>(n - 1);
  std::vector<Complex> psi(n);
  double norm = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const double x = q_min + static_cast<double>(a) * h;
    psi[a] = std::exp(-(x - st.x0) * (x - st.x0) / (4.0 * st.s * st.s)) * std::polar(1.0, st.p0 * x / hbar);
    norm += std::norm(psi[a]) * h;
  }
  for (auto& z : psi) z /= std::sqrt(norm);
  return psi;
}

/// -i hbar d/dx applied spectrally on the periodic extension n h.
inline std::vector<Complex> apply_momentum(const std::vector<Complex>& psi, double h, double hbar) {
  const std::size_t n = psi.size();
  auto spec = psi;
  fft::forward(spec);
  const double L = static_cast<double>(n) * h;
  for (std::size_t k = 0; k < n; ++k) {
    const long m = fft::signed_index(k, n);
    if (2 * static_cast<std::size_t>(std::labs(m)) == n) {
      spec[k] = 0.0;
      continue;
    }
    spec[k] *= hbar * 2.0 * kPi * static_cast<double>(m) / L;
  }
  fft::inverse(spec);
  return spec;
}

inline std::vector<Complex> apply_position(const std::vector<Complex>& psi, double q_min, double h) {
  auto out = psi;
  for (std::size_t a = 0; a < out.size(); ++a) out[a] *= q_min + static_cast<double>(a) * h;
  return out;
}

inline Complex braket(const std::vector<Complex>& a, const std::vector<Complex>& b, double h) {
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * h;
}

struct PolyObservable {
  std::string name;
  std::function<double(double, double)> symbol;
  // <psi| Weyl(symbol) |psi>, by direct operator application
  std::function<Complex(const std::vector<Complex>&, double, double, double)> expect;
};

inline std::vector<PolyObservable> poly_observables() {
  auto Q = [](const std::vector<Complex>& v, double q0, double h, double) { return apply_position(v, q0, h); };
  auto P = [](const std::vector<Complex>& v, double, double h, double hb) { return apply_momentum(v, h, hb); };
  using V = std::vector<Complex>;
  return {
      {"q", [](double q, double) { return q; }, [=](const V& v, double q0, double h, double hb) { return braket(v, Q(v, q0, h, hb), h); }},
      {"p", [](double, double p) { return p; }, [=](const V& v, double q0, double h, double hb) { return braket(v, P(v, q0, h, hb), h); }},
      {"q^2", [](double q, double) { return q * q; },
       [=](const V& v, double q0, double h, double hb) { return braket(v, Q(Q(v, q0, h, hb), q0, h, hb), h); }},
      {"p^2", [](double, double p) { return p * p; },
       [=](const V& v, double q0, double h, double hb) { return braket(v, P(P(v, q0, h, hb), q0, h, hb), h); }},
      {"qp", [](double q, double p) { return q * p; },
       [=](const V& v, double q0, double h, double hb) {
         return 0.5 * (braket(v, Q(P(v, q0, h, hb), q0, h, hb), h) + braket(v, P(Q(v, q0, h, hb), q0, h, hb), h));
       }},
      {"p^4", [](double, double p) { return p * p * p * p; },
       [=](const V& v, double q0, double h, double hb) {
         const auto pp = P(P(v, q0, h, hb), q0, h, hb);
         return braket(pp, pp, h);
       }},
      {"H", [](double q, double p) { return 0.5 * (q * q + p * p); },
       [=](const V& v, double q0, double h, double hb) {
         return 0.5 * (braket(v, Q(Q(v, q0, h, hb), q0, h, hb), h) + braket(v, P(P(v, q0, h, hb), q0, h, hb), h));
       }},
  };
}

/// max relative |pairing(state symbol, observable symbol) - <psi|O|psi>|.
inline double pairing_trace_error(std::size_t n, double half_box) {
  const double hbar = 1.0;
  const std::vector<GaussianState> states{{0.7, -0.4, 1.0}, {-1.1, 0.9, 0.8}, {0.6, -0.5, 0.3}};
  const auto obs = poly_observables();
  double worst = 0.0;
  for (const auto& st : states) {
    const auto psi = gaussian_samples(st, -half_box, half_box, n, hbar);
    const auto rho = wigner::OperatorKernel::projector(-half_box, half_box, psi);
    const auto w = wigner::to_state_symbol(wigner::wigner_transform(rho, hbar));
    for (const auto& o : obs) {
      const auto sym = wigner::PhaseSpaceField::sample(w.grid, hbar, o.symbol);
      const double pair = wigner::pairing(w, sym);
      const double tr = o.expect(psi, -half_box, rho.h(), hbar).real();
      worst = std::max(worst, std::abs(pair - tr) / std::abs(tr));
    }
  }
  return worst;
}

inline Suite pairing_suite() {
  const double fine = pairing_trace_error(256, 20.0);
  const double coarse = pairing_trace_error(128, 20.0);
  return {"pairing_vs_trace",
          {below("pairing-vs-trace relative error, 256^2", fine, 1e-6),
           below("error on 256^2 relative to 128^2 (refinement ratio)", fine / coarse, 1.0)}};
}

// ---------------------------------------------------------------------------
// Quantization round trip

inline wigner::OperatorKernel random_kernel(std::mt19937_64& rng, double half_box, std::size_t n, double hbar) {
  std::uniform_real_distribution<double> centre(-2.0, 2.0), width(0.6, 1.0), phase(0.0, 2.0 * kPi);
  std::uniform_int_distribution<int> terms(1, 3);
  const int m = terms(rng);
  std::vector<Complex> psi(n);
  for (int t = 0; t < m; ++t) {
    const GaussianState st{centre(rng), centre(rng), width(rng)};
    const Complex c = std::polar(1.0, phase(rng));
    const auto g = gaussian_samples(st, -half_box, half_box, n, hbar);
    for (std::size_t a = 0; a < n; ++a) psi[a] += c * g[a];
  }
  return wigner::OperatorKernel::projector(-half_box, half_box, psi);
}

inline double max_abs_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double m = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
    peak = std::max(peak, std::abs(a[i]));
  }
  return m / peak;
}

struct RoundTrip {
  double kernel = 0.0;  // max over cases of |Q(W(K)) - K| / max|K|
  double field = 0.0;   // max over cases of |W(Q(f)) - f| / max|f|
};

inline RoundTrip round_trip(std::uint64_t seed, int cases = 10) {
  std::mt19937_64 rng(seed);
  const double hbar = 1.0, half = 20.0;
  const std::size_t n = 256;
  RoundTrip r;
  for (int c = 0; c < cases; ++c) {
    const auto k = random_kernel(rng, half, n, hbar);
    const auto back = wigner::weyl_quantize(wigner::wigner_transform(k, hbar));
    r.kernel = std::max(r.kernel, max_abs_diff(k.values, back.values));
    const auto f = wigner::wigner_transform(random_kernel(rng, half, n, hbar), hbar);
    const auto again = wigner::wigner_transform(wigner::weyl_quantize(f), hbar);
    r.field = std::max(r.field, max_abs_diff(f.values, again.values));
  }
  return r;
}

inline Suite round_trip_suite(std::uint64_t seed) {
  const auto r = round_trip(seed);
  return {"round_trip",
          {below("weyl_quantize(wigner_transform(K)) vs K, 10 cases", r.kernel, 1e-8),
           below("wigner_transform(weyl_quantize(f)) vs f, 10 cases", r.field, 1e-8)}};
}

// ---------------------------------------------------------------------------
// Pointer basis

struct PointerStats {
  double reconstruction = 0.0;  // independent plain-loop check
  double unitarity = 0.0;
  double trace_change = 0.0;
  double offdiagonal = 0.0;
};

inline PointerStats pointer_basis_stats(std::uint64_t seed, int cases = 100) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 8);
  PointerStats s;
  for (int c = 0; c < cases; ++c) {
    const auto n = static_cast<std::size_t>(size(rng));
    const auto grid = spectral::EnergyGrid::make(0.0, 1.0, 3);
    auto k = spectral::SpectralKernel::zeros(grid, n);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      // Every tenth case gets a degenerate spectrum: a multiple of the identity plus one rank-1 term.
      const bool degenerate = c % 10 == 0;
      std::vector<Complex> v(n);
      for (auto& z : v) z = {gauss(rng), gauss(rng)};
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
          Complex z = degenerate ? (a == b ? 1.0 : 0.0) + v[a] * std::conj(v[b]) : Complex{gauss(rng), a == b ? 0.0 : gauss(rng)};
          k.sing(i, a, b) = z;
          k.sing(i, b, a) = std::conj(z);
        }
    }
    const spectral::VanHoveState st{k, 1.0};
    const auto basis = spectral::pointer_basis(st);
    for (std::size_t i = 0; i < grid.n_points; ++i)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
          Complex rec{}, uu{};
          for (std::size_t p = 0; p < n; ++p) {
            rec += basis.u(i, a, p) * basis.eigenvalue(i, p) * std::conj(basis.u(i, b, p));
            uu += std::conj(basis.u(i, p, a)) * basis.u(i, p, b);
          }
          s.reconstruction = std::max(s.reconstruction, std::abs(rec - k.sing(i, a, b)));
          s.unitarity = std::max(s.unitarity, std::abs(uu - (a == b ? 1.0 : 0.0)));
        }
    const auto rotated = spectral::apply_pointer_basis(st, basis);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      Complex before{}, after{};
      for (std::size_t a = 0; a < n; ++a) {
        before += k.sing(i, a, a);
        after += rotated.kernel.sing(i, a, a);
      }
      s.trace_change = std::max(s.trace_change, std::abs(after - before));
    }
    s.offdiagonal = std::max(s.offdiagonal, spectral::max_offdiagonal(rotated.kernel));
  }
  return s;
}

inline Suite pointer_suite(std::uint64_t seed) {
  const auto s = pointer_basis_stats(seed);
  return {"pointer_basis",
          {below("reconstruction error, 100 random hermitian blocks", s.reconstruction, 1e-10),
           below("per-energy trace change under apply_pointer_basis", s.trace_change, 1e-12),
           below("unitarity error", s.unitarity, 1e-10)}};
}

// ---------------------------------------------------------------------------
// Charts

inline std::vector<charts::Chart> pendulum_charts(double omega0 = 1.0) {
  const auto sys = dynamics::pendulum(omega0);
  charts::Chart lib, rot;
  lib.label = "libration";
  lib.system = sys;
  lib.predicate = charts::Predicate::separatrix_side(true, 0, false);
  lib.constants = {dynamics::make_constant(sys, "hamiltonian", {})};
  lib.priority = 0;
  rot.label = "rotation";
  rot.system = sys;
  rot.predicate = charts::Predicate::separatrix_side(false, 0, true);
  rot.constants = {dynamics::make_constant(sys, "hamiltonian", {})};
  rot.priority = 1;
  return {lib, rot};
}

/// Rectangle chart covering the lattice with constants H and P.
inline double two_dof_residual(const dynamics::System& sys, const dynamics::Constant& c, double half, std::size_t n) {
  charts::Chart ch;
  ch.label = "box";
  ch.system = sys;
  ch.predicate = charts::Predicate::rectangle(std::vector<double>(4, -half), std::vector<double>(4, half));
  ch.constants = {c};
  charts::Lattice l{std::vector<double>(4, -half), std::vector<double>(4, half), std::vector<std::size_t>(4, n)};
  return charts::check_involution(ch, l);
}

inline Suite partition_suite(const charts::Partition& pendulum) {
  const auto rep = charts::validate_partition(pendulum);
  double pend = 0.0;
  for (const auto& c : pendulum.charts) pend = std::max(pend, charts::check_involution(c, pendulum.lattice));
  const auto sep = dynamics::separable_oscillator(1.0, 1.0);
  const double sep_res = two_dof_residual(sep, dynamics::make_constant(sep, "oscillator_energy", {{"dof", 1}}), 2.0, 16);
  const auto hh = dynamics::henon_heiles(0.1);
  const double hh_res = two_dof_residual(hh, dynamics::make_constant(hh, "oscillator_energy", {{"dof", 1}}), 1.0, 16);
  return {"partition",
          {at_most("pendulum partition gaps + overlaps", static_cast<double>(rep.gaps + rep.overlaps), 0.0),
           below("pendulum chart involution residual", pend, 1e-6),
           below("separable 2-dof involution residual", sep_res, 1e-6),
           above("Henon-Heiles (lambda = 0.1) residual, negative control", hh_res, 1e-2)}};
}

inline charts::Partition pendulum_partition() {
  return {pendulum_charts(), charts::Lattice::from_grid(wigner::PhaseGrid::make(-kPi, kPi, 128, -3.0, 3.0, 128))};
}

// ---------------------------------------------------------------------------
// Classical limit

inline charts::Chart harmonic_chart() {
  charts::Chart c;
  c.label = "all";
  c.system = dynamics::harmonic(1.0);
  c.predicate = charts::Predicate::energy_window(0.0, 100.0);
  c.constants = {dynamics::make_constant(c.system, "hamiltonian", {})};
  return c;
}

inline wigner::PhaseGrid classical_grid() { return wigner::PhaseGrid::make(-4.0, 4.0, 256, -4.0, 4.0, 256); }

struct ClassicalStats {
  double nonuniformity = 0.0;
  double min_value = 0.0;
  double normalization = 0.0;
  double duality = 0.0;
  classical::ClassicalDensity ring;
};

inline ClassicalStats classical_stats(std::uint64_t seed, int duality_cases = 20) {
  ClassicalStats s;
  const auto chart = harmonic_chart();
  const auto grid = classical_grid();
  const auto aa = classical::build_action_angle(chart, {{1.0}});
  s.ring = classical::classical_density({{0, 0, 1.0}}, {aa}, grid, 0.0);
  s.nonuniformity = classical::angular_nonuniformity(s.ring, aa, 0);
  s.min_value = s.ring.min_value;
  s.normalization = std::abs(s.ring.integral - 1.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), coef(0.5, 2.0);
  const auto egrid = spectral::EnergyGrid::make(0.8, 2.5, 18);
  for (int c = 0; c < duality_cases; ++c) {
    auto k = spectral::SpectralKernel::zeros(egrid, 1);
    const auto w = egrid.weights();
    double total = 0.0;
    for (std::size_t i = 0; i < egrid.n_points; ++i) {
      const double v = u(rng) < 0.4 ? u(rng) : 0.0;
      k.sing(i, 0, 0) = v;
      total += w[i] * v;
    }
    if (total == 0.0) {
      k.sing(egrid.n_points / 2, 0, 0) = 1.0;
      total = w[egrid.n_points / 2];
    }
    for (auto& z : k.singular) z /= total;
    const spectral::VanHoveState st{k, 1.0};
    const double a = coef(rng), b = coef(rng);
    const auto obs = kernels::diagonal_singular(egrid, 1, [&](double e) { return a + b * e; });
    const auto dc = classical::decohered_to_classical(st, {{0}}, {chart}, grid, 0.0);
    const double spectral_side = classical::spectral_pairing(st, {obs});
    const double phase_side = classical::phase_pairing(dc.density, chart.system, [&](double e) { return a + b * e; });
    s.duality = std::max(s.duality, std::abs(phase_side - spectral_side) / std::abs(spectral_side));
  }
  return s;
}

inline Suite classical_suite(std::uint64_t seed) {
  const auto s = classical_stats(seed);
  return {"classical_limit",
          {below("single-level angular non-uniformity", s.nonuniformity, 1e-3),
           at_least("density minimum", s.min_value, -1e-10),
           below("|integral - 1|", s.normalization, 1e-3),
           below("duality, max relative error over 20 seeded cases", s.duality, 1e-3)}};
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryStats {
  double closed_form = 0.0;
  double energy_drift = 0.0;
  double angle_residual = 0.0;
  double angle_r2_gap = 0.0;  // 1 - R^2
  double pendulum_rate = 0.0; // relative error of the fitted angle rate vs 2 pi / T
  double flow = 0.0;
  double flow_negative = 0.0;
};

/// Unwrapped angle_of along a trajectory, every `stride`-th sample.
inline std::pair<std::vector<double>, std::vector<double>> angle_series(const classical::ActionAngleChart& aa,
                                                                        const classical::Trajectory& tr,
                                                                        std::size_t stride) {
  std::vector<double> t, th;
  double offset = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); i += stride) {
    double a = classical::angle_of(aa, 0, tr.states[i]);
    if (!th.empty()) {
      if (a + offset < prev - kPi) offset += 2.0 * kPi;
      if (a + offset > prev + kPi) offset -= 2.0 * kPi;
    }
    prev = a + offset;
    t.push_back(tr.times[i]);
    th.push_back(prev);
  }
  return {t, th};
}

inline TrajectoryStats trajectory_stats(std::uint64_t seed) {
  TrajectoryStats s;
  const auto chart = harmonic_chart();
  const auto aa = classical::build_action_angle(chart, {{0.5}});
  const auto tr = classical::sample_trajectory(aa, 0, 0.0, {}, 20.0, 1e-3);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    s.closed_form = std::max({s.closed_form, std::abs(tr.states[i][0] - std::sin(t)), std::abs(tr.states[i][1] - std::cos(t))});
  }
  s.energy_drift = tr.energy_drift;
  const auto [t, th] = angle_series(aa, tr, 10);
  const auto fit = fit_line(t, th);
  for (std::size_t i = 0; i < t.size(); ++i)
    s.angle_residual = std::max(s.angle_residual, std::abs(th[i] - (fit.intercept + fit.slope * t[i])));
  s.angle_r2_gap = 1.0 - fit.r_squared;

  const auto pend = pendulum_charts()[0];
  const auto paa = classical::build_action_angle(pend, {{1.0}});
  const auto ptr = classical::sample_trajectory(paa, 0, 0.3, {}, 20.0, 1e-3);
  const auto [pt, pth] = angle_series(paa, ptr, 10);
  const double rate = fit_line(pt, pth).slope;
  s.pendulum_rate = std::abs(rate / paa.orbits[0].angular_rate() - 1.0);

  const auto grid = classical_grid();
  const auto ring = classical::classical_density({{0, 0, 1.0}}, {classical::build_action_angle(chart, {{1.0}})}, grid, 0.0);
  s.flow = classical::density_flow_invariance(ring, chart.system, 1.0);
  const auto qfield = wigner::PhaseSpaceField::sample(grid, 1.0, [](double q, double) { return q; });
  s.flow_negative = classical::density_flow_invariance(qfield, chart.system, 1.0);
  (void)seed;
  return s;
}

inline Suite trajectory_suite(std::uint64_t seed) {
  const auto s = trajectory_stats(seed);
  return {"trajectories",
          {below("harmonic trajectory vs (sin t, cos t), t in [0, 20]", s.closed_form, 1e-6),
           below("energy drift", s.energy_drift, 1e-8),
           below("angle vs linear fit, max residual", s.angle_residual, 1e-6),
           below("1 - R^2 of the angle fit", s.angle_r2_gap, 1e-6),
           below("pendulum angle rate vs 2 pi / T, relative", s.pendulum_rate, 1e-4),
           below("flow invariance drift, ring density, t = 1", s.flow, 1e-2),
           at_least("flow drift of the field q (negative control)", s.flow_negative, 0.5)}};
}

// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kDefaultSeed = 20240611;

inline std::vector<Suite> run_all(std::uint64_t seed = kDefaultSeed) {
  return {decay_gaussian(),        decay_c1(),           hbar_slope_suite(),
          pairing_suite(),         round_trip_suite(seed), pointer_suite(seed),
          partition_suite(pendulum_partition()), classical_suite(seed), trajectory_suite(seed)};
}

}  // namespace sid::verify
