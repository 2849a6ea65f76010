#pragma once

// States and observables in the van Hove energy basis.
//
// A kernel is stored as a pair: the diagonal-singular part O(w)_{mm'}
// (the coefficient of delta(w - w')) on an energy grid, and the regular
// part O(w, w')_{mm'} on the grid square. Deltas are never sampled; the
// split is structural. Integrals use composite trapezoid weights.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sid/common.hpp"

namespace sid::spectral {

struct EnergyGrid {
  double omega_min = 0.0;
  double omega_max = 1.0;
  std::size_t n_points = 2;

  static EnergyGrid make(double omega_min, double omega_max, std::size_t n_points) {
    if (!(omega_min >= 0.0)) throw PreconditionError("energy grid: omega_min must be >= 0");
    if (!(omega_max > omega_min)) throw PreconditionError("energy grid: omega_max must exceed omega_min");
    if (n_points < 2) throw PreconditionError("energy grid: need at least 2 points");
    return EnergyGrid{omega_min, omega_max, n_points};
  }

  double spacing() const { return (omega_max - omega_min) / static_cast<double>(n_points - 1); }
  double node(std::size_t i) const {
    return i + 1 == n_points ? omega_max : omega_min + static_cast<double>(i) * spacing();
  }
  std::vector<double> nodes() const {
    std::vector<double> w(n_points);
    for (std::size_t i = 0; i < n_points; ++i) w[i] = node(i);
    return w;
  }
  std::vector<double> weights() const { return trapezoid_weights(n_points, spacing()); }

  /// Largest time at which direct quadrature resolves e^{i nu t / hbar}:
  /// a quarter period per grid cell.
  double validity_limit(double hbar) const { return hbar / (4.0 * spacing()); }

  friend bool operator==(const EnergyGrid&, const EnergyGrid&) = default;
};

struct SpectralKernel {
  EnergyGrid grid;
  std::size_t n_channels = 1;
  std::vector<Complex> singular;  // (w, m, m')
  std::vector<Complex> regular;   // (w, w', m, m')

  static SpectralKernel zeros(const EnergyGrid& grid, std::size_t n_channels) {
    SpectralKernel k;
    k.grid = grid;
    k.n_channels = n_channels;
    const std::size_t n = grid.n_points, c = n_channels;
    k.singular.assign(n * c * c, Complex{});
    k.regular.assign(n * n * c * c, Complex{});
    return k;
  }

  std::size_t singular_index(std::size_t w, std::size_t m, std::size_t mp) const {
    return (w * n_channels + m) * n_channels + mp;
  }
  std::size_t regular_index(std::size_t w, std::size_t wp, std::size_t m, std::size_t mp) const {
    return ((w * grid.n_points + wp) * n_channels + m) * n_channels + mp;
  }

  Complex& sing(std::size_t w, std::size_t m, std::size_t mp) { return singular[singular_index(w, m, mp)]; }
  const Complex& sing(std::size_t w, std::size_t m, std::size_t mp) const {
    return singular[singular_index(w, m, mp)];
  }
  Complex& reg(std::size_t w, std::size_t wp, std::size_t m, std::size_t mp) {
    return regular[regular_index(w, wp, m, mp)];
  }
  const Complex& reg(std::size_t w, std::size_t wp, std::size_t m, std::size_t mp) const {
    return regular[regular_index(w, wp, m, mp)];
  }

  /// Throws StructuralError on array/grid disagreement or non-finite entries.
  void check_shape() const {
    const std::size_t n = grid.n_points, c = n_channels;
    if (n < 2 || c == 0) throw StructuralError("kernel: empty grid or channel set");
    if (singular.size() != n * c * c) {
      std::ostringstream os;
      os << "kernel: singular array has " << singular.size() << " entries, expected " << n * c * c;
      throw StructuralError(os.str());
    }
    if (regular.size() != n * n * c * c) {
      std::ostringstream os;
      os << "kernel: regular array has " << regular.size() << " entries, expected " << n * n * c * c;
      throw StructuralError(os.str());
    }
    if (!all_finite(singular) || !all_finite(regular))
      throw StructuralError("kernel: non-finite entries");
  }

  bool regular_is_zero() const {
    return std::all_of(regular.begin(), regular.end(), [](const Complex& z) { return z == Complex{}; });
  }
};

struct VanHoveObservable {
  SpectralKernel kernel;
};

struct VanHoveState {
  SpectralKernel kernel;
  double hbar = 1.0;
};

struct Violation {
  std::string constraint;  // "hermiticity", "positivity", "normalization"
  std::string location;
  double magnitude = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

struct StateTolerances {
  double hermiticity = 1e-10;
  double positivity = 1e-12;
  double normalization = 1e-10;
};

/// Sum_m Integral rho(w)_{mm} dw by trapezoid quadrature.
inline double trace(const SpectralKernel& k) {
  const auto w = k.grid.weights();
  double total = 0.0;
  for (std::size_t i = 0; i < k.grid.n_points; ++i)
    for (std::size_t m = 0; m < k.n_channels; ++m) total += w[i] * k.sing(i, m, m).real();
  return total;
}

inline double trace_at(const SpectralKernel& k, std::size_t i) {
  double t = 0.0;
  for (std::size_t m = 0; m < k.n_channels; ++m) t += k.sing(i, m, m).real();
  return t;
}

/// Largest |K - K^dagger| over both parts, with its location.
struct AsymmetryProbe {
  double singular = 0.0;
  std::string singular_at;
  double regular = 0.0;
  std::string regular_at;
};

inline AsymmetryProbe probe_asymmetry(const SpectralKernel& k) {
  AsymmetryProbe a;
  const std::size_t n = k.grid.n_points, c = k.n_channels;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < c; ++m)
      for (std::size_t mp = m; mp < c; ++mp) {
        const double d = std::abs(k.sing(i, m, mp) - std::conj(k.sing(i, mp, m)));
        if (d > a.singular) {
          a.singular = d;
          std::ostringstream os;
          os << "singular(w=" << i << ", m=" << m << ", m'=" << mp << ")";
          a.singular_at = os.str();
        }
      }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t m = 0; m < c; ++m)
        for (std::size_t mp = 0; mp < c; ++mp) {
          const double d = std::abs(k.reg(i, j, m, mp) - std::conj(k.reg(j, i, mp, m)));
          if (d > a.regular) {
            a.regular = d;
            std::ostringstream os;
            os << "regular(w=" << i << ", w'=" << j << ", m=" << m << ", m'=" << mp << ")";
            a.regular_at = os.str();
          }
        }
  return a;
}

/// Checks the state constraints: hermiticity of both parts, nonnegative
/// diagonal of the singular part, and unit trace (or `expected_trace` for a
/// single chart block of a larger state).
inline ValidationReport validate_state(const VanHoveState& state, double expected_trace = 1.0,
                                       const StateTolerances& tol = {}) {
  state.kernel.check_shape();
  if (!(state.hbar > 0.0)) throw StructuralError("state: hbar must be positive");
  const auto& k = state.kernel;
  ValidationReport report;

  const auto asym = probe_asymmetry(k);
  if (asym.regular > tol.hermiticity)
    report.violations.push_back({"hermiticity", asym.regular_at, asym.regular});
  if (asym.singular > tol.hermiticity)
    report.violations.push_back({"hermiticity", asym.singular_at, asym.singular});

  double worst = 0.0;
  std::string worst_at;
  for (std::size_t i = 0; i < k.grid.n_points; ++i)
    for (std::size_t m = 0; m < k.n_channels; ++m) {
      const double v = k.sing(i, m, m).real();
      if (v < -tol.positivity && -v > worst) {
        worst = -v;
        std::ostringstream os;
        os << "singular(w=" << i << ", m=" << m << ", m=" << m << ")";
        worst_at = os.str();
      }
    }
  if (worst > 0.0) report.violations.push_back({"positivity", worst_at, worst});

  const double tr = trace(k);
  if (std::abs(tr - expected_trace) > tol.normalization) {
    std::ostringstream os;
    os << "trace = " << tr << " (expected " << expected_trace << ")";
    report.violations.push_back({"normalization", os.str(), std::abs(tr - expected_trace)});
  }
  return report;
}

struct ExpectationParts {
  double singular = 0.0;   // time independent
  Complex regular{};       // R(t)
  bool beyond_validity = false;

  double total() const { return singular + regular.real(); }
};

namespace detail {

inline void check_compatible(const SpectralKernel& a, const SpectralKernel& b) {
  a.check_shape();
  b.check_shape();
  if (!(a.grid == b.grid)) throw StructuralError("state and observable use different energy grids");
  if (a.n_channels != b.n_channels)
    throw StructuralError("state and observable use different channel counts");
}

inline Complex channel_contraction(const SpectralKernel& rho, const SpectralKernel& obs, std::size_t i,
                                   std::size_t j) {
  Complex acc{};
  const std::size_t c = rho.n_channels;
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t mp = 0; mp < c; ++mp) acc += std::conj(rho.reg(i, j, m, mp)) * obs.reg(i, j, m, mp);
  return acc;
}

/// Precomputed pieces of the mean value; the channel contraction of the
/// regular part is time independent and reused for every t.
struct ExpectationPlan {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<Complex> contraction;  // (w, w') weighted by w_i w_j
  double singular = 0.0;
  bool regular_zero = true;
  double hbar = 1.0;
  double validity = 0.0;
};

inline ExpectationPlan plan(const VanHoveState& state, const VanHoveObservable& obs) {
  check_compatible(state.kernel, obs.kernel);
  const auto& rho = state.kernel;
  const auto& o = obs.kernel;
  ExpectationPlan p;
  p.nodes = rho.grid.nodes();
  p.weights = rho.grid.weights();
  p.hbar = state.hbar;
  p.validity = rho.grid.validity_limit(state.hbar);
  const std::size_t n = rho.grid.n_points, c = rho.n_channels;

  Complex s{};
  for (std::size_t i = 0; i < n; ++i) {
    Complex row{};
    for (std::size_t m = 0; m < c; ++m)
      for (std::size_t mp = 0; mp < c; ++mp) row += std::conj(rho.sing(i, m, mp)) * o.sing(i, m, mp);
    s += p.weights[i] * row;
  }
  if (std::abs(s.imag()) > 1e-8 * std::max(1.0, std::abs(s)))
    throw NumericalError("singular contribution has an imaginary residue; inputs are not hermitian");
  p.singular = s.real();

  p.regular_zero = rho.regular_is_zero() || o.regular_is_zero();
  if (!p.regular_zero) {
    p.contraction.assign(n * n, Complex{});
    parallel_for(n, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j)
        p.contraction[i * n + j] = p.weights[i] * p.weights[j] * channel_contraction(rho, o, i, j);
    });
  }
  return p;
}

inline Complex regular_at(const ExpectationPlan& p, double t) {
  if (p.regular_zero) return {};
  const std::size_t n = p.nodes.size();
  const double w0 = p.nodes.front();
  std::vector<Complex> phase(n);
  for (std::size_t i = 0; i < n; ++i) phase[i] = std::polar(1.0, (p.nodes[i] - w0) * t / p.hbar);
  std::vector<Complex> rows(n);
  parallel_for(n, [&](std::size_t i) {
    Complex acc{};
    const Complex* c = &p.contraction[i * n];
    for (std::size_t j = 0; j < n; ++j) acc += c[j] * std::conj(phase[j]);
    rows[i] = phase[i] * acc;
  });
  Complex total{};
  for (const auto& r : rows) total += r;
  return total;
}

}  // namespace detail

/// Mean value split into its singular and regular contributions at time t.
inline ExpectationParts expectation_parts(const VanHoveState& state, const VanHoveObservable& obs, double t) {
  const auto p = detail::plan(state, obs);
  ExpectationParts out;
  out.singular = p.singular;
  out.regular = detail::regular_at(p, t);
  out.beyond_validity = std::abs(t) > p.validity;
  return out;
}

/// <O>_{rho(t)}: time-independent singular pairing plus the oscillatory
/// double integral of conj(rho(w,w')) e^{i(w-w')t/hbar} O(w,w').
inline double expectation_at_time(const VanHoveState& state, const VanHoveObservable& obs, double t) {
  const auto parts = expectation_parts(state, obs, t);
  const Complex total = parts.singular + parts.regular;
  if (!std::isfinite(total.real()) || !std::isfinite(total.imag()))
    throw NumericalError("expectation value is not finite");
  if (std::abs(total.imag()) > 1e-8 * std::max(1.0, std::abs(total)))
    throw NumericalError("expectation value has an imaginary residue above 1e-8");
  return total.real();
}

struct DecayRow {
  double t = 0.0;
  double total = 0.0;
  Complex regular{};
};

struct DecayCurve {
  std::vector<DecayRow> rows;
  double singular = 0.0;
  double validity_limit = 0.0;
  bool beyond_validity = false;  // some t exceeded validity_limit
};

inline DecayCurve decay_curve(const VanHoveState& state, const VanHoveObservable& obs,
                              const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw PreconditionError("decay_curve: empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw PreconditionError("decay_curve: time grid must be increasing");
  const auto p = detail::plan(state, obs);
  DecayCurve curve;
  curve.singular = p.singular;
  curve.validity_limit = p.validity;
  curve.rows.reserve(t_grid.size());
  for (double t : t_grid) {
    const Complex r = detail::regular_at(p, t);
    const Complex total = p.singular + r;
    if (!std::isfinite(total.real()) || !std::isfinite(total.imag()))
      throw NumericalError("decay_curve: non-finite value");
    if (std::abs(total.imag()) > 1e-8 * std::max(1.0, std::abs(total)))
      throw NumericalError("decay_curve: imaginary residue above 1e-8");
    curve.rows.push_back({t, total.real(), r});
    if (std::abs(t) > p.validity) curve.beyond_validity = true;
  }
  return curve;
}

/// The t -> infinity weak limit: only the diagonal-singular part survives.
inline VanHoveState weak_limit(const VanHoveState& state) {
  state.kernel.check_shape();
  VanHoveState out = state;
  std::fill(out.kernel.regular.begin(), out.kernel.regular.end(), Complex{});
  return out;
}

struct PointerBasisResult {
  std::size_t n_points = 0;
  std::size_t n_channels = 0;
  std::vector<Complex> unitary;     // (w, m, p)
  std::vector<double> eigenvalues;  // (w, p), descending per w
  double max_reconstruction_error = 0.0;
  double max_unitarity_error = 0.0;

  const Complex& u(std::size_t w, std::size_t m, std::size_t p) const {
    return unitary[(w * n_channels + m) * n_channels + p];
  }
  Complex& u(std::size_t w, std::size_t m, std::size_t p) { return unitary[(w * n_channels + m) * n_channels + p]; }
  double eigenvalue(std::size_t w, std::size_t p) const { return eigenvalues[w * n_channels + p]; }

  static PointerBasisResult identity(std::size_t n_points, std::size_t n_channels) {
    PointerBasisResult r;
    r.n_points = n_points;
    r.n_channels = n_channels;
    r.unitary.assign(n_points * n_channels * n_channels, Complex{});
    r.eigenvalues.assign(n_points * n_channels, 0.0);
    for (std::size_t w = 0; w < n_points; ++w)
      for (std::size_t m = 0; m < n_channels; ++m) r.u(w, m, m) = 1.0;
    return r;
  }
};

namespace detail {

using MatrixC = Eigen::MatrixXcd;

struct Eigenpair {
  double value;
  std::size_t anchor;  // smallest channel index attaining the max overlap
  Eigen::VectorXcd vec;
};

inline std::size_t max_overlap_index(const Eigen::VectorXcd& v) {
  double best = -1.0;
  std::size_t at = 0;
  for (Eigen::Index m = 0; m < v.size(); ++m) {
    const double a = std::abs(v[m]);
    if (a > best + 1e-12) {
      best = a;
      at = static_cast<std::size_t>(m);
    }
  }
  return at;
}

/// Hermitian eigen-decomposition with a fixed ordering: eigenvalues
/// descending, near-equal eigenvalues ordered by their anchor index, and each
/// eigenvector phased so its anchor component is real and positive.
inline std::vector<Eigenpair> ordered_eigensystem(const MatrixC& a) {
  const MatrixC herm = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixC> solver(herm);
  if (solver.info() != Eigen::Success) throw NumericalError("pointer_basis: eigensolver failed");
  std::vector<Eigenpair> pairs;
  const auto n = static_cast<std::size_t>(a.rows());
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::VectorXcd v = solver.eigenvectors().col(static_cast<Eigen::Index>(k));
    const std::size_t anchor = max_overlap_index(v);
    const Complex z = v[static_cast<Eigen::Index>(anchor)];
    v *= std::conj(z) / std::abs(z);
    pairs.push_back({solver.eigenvalues()[static_cast<Eigen::Index>(k)], anchor, v});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Eigenpair& x, const Eigenpair& y) { return x.value > y.value; });
  // Clusters of near-equal eigenvalues are ordered by anchor.
  std::size_t lo = 0;
  while (lo < pairs.size()) {
    std::size_t hi = lo + 1;
    while (hi < pairs.size() &&
           std::abs(pairs[hi].value - pairs[lo].value) <= 1e-12 * std::max(1.0, std::abs(pairs[lo].value)))
      ++hi;
    std::stable_sort(pairs.begin() + static_cast<long>(lo), pairs.begin() + static_cast<long>(hi),
                     [](const Eigenpair& x, const Eigenpair& y) { return x.anchor < y.anchor; });
    lo = hi;
  }
  return pairs;
}

inline MatrixC singular_block(const SpectralKernel& k, std::size_t i) {
  const auto c = static_cast<Eigen::Index>(k.n_channels);
  MatrixC a(c, c);
  for (Eigen::Index m = 0; m < c; ++m)
    for (Eigen::Index mp = 0; mp < c; ++mp)
      a(m, mp) = k.sing(i, static_cast<std::size_t>(m), static_cast<std::size_t>(mp));
  return a;
}

inline MatrixC unitary_block(const PointerBasisResult& b, std::size_t i) {
  const auto c = static_cast<Eigen::Index>(b.n_channels);
  MatrixC u(c, c);
  for (Eigen::Index m = 0; m < c; ++m)
    for (Eigen::Index p = 0; p < c; ++p) u(m, p) = b.u(i, static_cast<std::size_t>(m), static_cast<std::size_t>(p));
  return u;
}

}  // namespace detail

/// Diagonalizes each per-energy block rho(w)_{mm'} of the singular part.
inline PointerBasisResult pointer_basis(const VanHoveState& state) {
  const auto& k = state.kernel;
  k.check_shape();
  const std::size_t n = k.grid.n_points, c = k.n_channels;
  PointerBasisResult r;
  r.n_points = n;
  r.n_channels = c;
  r.unitary.assign(n * c * c, Complex{});
  r.eigenvalues.assign(n * c, 0.0);
  std::vector<double> recon(n, 0.0), unit(n, 0.0);
  std::vector<double> asym(n, 0.0);

  parallel_for(n, [&](std::size_t i) {
    const detail::MatrixC a = detail::singular_block(k, i);
    asym[i] = (a - a.adjoint()).cwiseAbs().maxCoeff();
    if (asym[i] > 1e-8) return;
    const auto pairs = detail::ordered_eigensystem(a);
    detail::MatrixC u(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
    Eigen::VectorXd lam(static_cast<Eigen::Index>(c));
    for (std::size_t p = 0; p < c; ++p) {
      u.col(static_cast<Eigen::Index>(p)) = pairs[p].vec;
      lam[static_cast<Eigen::Index>(p)] = pairs[p].value;
      r.eigenvalues[i * c + p] = pairs[p].value;
      for (std::size_t m = 0; m < c; ++m) r.u(i, m, p) = pairs[p].vec[static_cast<Eigen::Index>(m)];
    }
    const detail::MatrixC rebuilt = u * lam.cast<Complex>().asDiagonal() * u.adjoint();
    recon[i] = (rebuilt - a).cwiseAbs().maxCoeff();
    unit[i] = (u.adjoint() * u - detail::MatrixC::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
  });

  for (std::size_t i = 0; i < n; ++i)
    if (asym[i] > 1e-8) {
      std::ostringstream os;
      os << "pointer_basis: singular block at w index " << i << " is not hermitian (asymmetry " << asym[i] << ")";
      throw PreconditionError(os.str());
    }
  r.max_reconstruction_error = *std::max_element(recon.begin(), recon.end());
  r.max_unitarity_error = *std::max_element(unit.begin(), unit.end());
  return r;
}

/// Rotates the state into the basis: rho(w) -> U(w)^dagger rho(w) U(w) and
/// rho(w,w') -> U(w)^dagger rho(w,w') U(w').
inline VanHoveState apply_pointer_basis(const VanHoveState& state, const PointerBasisResult& basis) {
  const auto& k = state.kernel;
  k.check_shape();
  if (basis.n_points != k.grid.n_points || basis.n_channels != k.n_channels ||
      basis.unitary.size() != k.grid.n_points * k.n_channels * k.n_channels)
    throw StructuralError("apply_pointer_basis: basis shape does not match the state");
  const std::size_t n = k.grid.n_points, c = k.n_channels;
  VanHoveState out = state;
  std::vector<detail::MatrixC> us(n);
  for (std::size_t i = 0; i < n; ++i) us[i] = detail::unitary_block(basis, i);

  parallel_for(n, [&](std::size_t i) {
    const detail::MatrixC a = us[i].adjoint() * detail::singular_block(k, i) * us[i];
    for (std::size_t m = 0; m < c; ++m)
      for (std::size_t mp = 0; mp < c; ++mp)
        out.kernel.sing(i, m, mp) = a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp));
  });
  if (!k.regular_is_zero()) {
    parallel_for(n, [&](std::size_t i) {
      detail::MatrixC block(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = 0; m < c; ++m)
          for (std::size_t mp = 0; mp < c; ++mp)
            block(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp)) = k.reg(i, j, m, mp);
        const detail::MatrixC rot = us[i].adjoint() * block * us[j];
        for (std::size_t m = 0; m < c; ++m)
          for (std::size_t mp = 0; mp < c; ++mp)
            out.kernel.reg(i, j, m, mp) = rot(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp));
      }
    });
  }
  return out;
}

/// Largest |rho(w)_{mm'}|, m != m', of the singular part.
inline double max_offdiagonal(const SpectralKernel& k) {
  double worst = 0.0;
  for (std::size_t i = 0; i < k.grid.n_points; ++i)
    for (std::size_t m = 0; m < k.n_channels; ++m)
      for (std::size_t mp = 0; mp < k.n_channels; ++mp)
        if (m != mp) worst = std::max(worst, std::abs(k.sing(i, m, mp)));
  return worst;
}

// Cross-chart orthogonality is structural: each chart owns its own block and
// no operation ever contracts blocks of different charts.
struct ChartBlock {
  std::string chart;
  VanHoveState state;
};

struct ChartedState {
  std::vector<ChartBlock> blocks;
};

/// Validates every block for hermiticity and positivity and the sum of the
/// block traces for normalization.
inline ValidationReport validate_charted(const ChartedState& s, const StateTolerances& tol = {}) {
  ValidationReport report;
  double total = 0.0;
  for (const auto& b : s.blocks) {
    const double tr = trace(b.state.kernel);
    auto r = validate_state(b.state, tr, tol);
    for (auto& v : r.violations) {
      v.location = b.chart + ": " + v.location;
      report.violations.push_back(v);
    }
    total += tr;
  }
  if (std::abs(total - 1.0) > tol.normalization) {
    std::ostringstream os;
    os << "sum of chart traces = " << total << " (expected 1)";
    report.violations.push_back({"normalization", os.str(), std::abs(total - 1.0)});
  }
  return report;
}

}  // namespace sid::spectral
