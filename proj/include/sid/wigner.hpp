#pragma once

// Weyl-Wigner-Moyal symbols for one degree of freedom.
//
// Convention: f(q, p) = Integral <q + D/2| f |q - D/2> exp(-i p D / hbar) dD,
// so the identity maps to 1, p-hat maps to p and {q, p} = +1. State symbols
// carry the extra factor (2 pi hbar)^-1; operator symbols carry none.
//
// Discretization. Kernel samples K[a][b] live on a uniform position grid x_a
// with spacing h. An entry has midpoint (x_a + x_b)/2 and separation
// (a - b) h, so even separations sit on integer rows and odd separations on
// half-integer rows. The transform evaluates both families by FFT over the
// separation, then moves the odd family onto the integer rows by spectral
// midpoint interpolation. The momentum grid is the Fourier dual of the
// position grid: n points, dp = 2 pi hbar / (n h), centred on zero. Weyl
// quantization inverts each step.

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sid/common.hpp"
#include "sid/fft.hpp"

namespace sid::wigner {

struct PhaseGrid {
  double q_min = -1.0, q_max = 1.0;
  double p_min = -1.0, p_max = 1.0;
  std::size_t n_q = 4, n_p = 4;

  static PhaseGrid make(double q_min, double q_max, std::size_t n_q, double p_min, double p_max,
                        std::size_t n_p) {
    PhaseGrid g{q_min, q_max, p_min, p_max, n_q, n_p};
    g.validate();
    return g;
  }

  /// Position grid [q_min, q_max] with n points and the momentum grid dual
  /// to it under the discrete transform.
  static PhaseGrid dual(double q_min, double q_max, std::size_t n, double hbar) {
    const double h = (q_max - q_min) / static_cast<double>(n - 1);
    const double dp = 2.0 * kPi * hbar / (static_cast<double>(n) * h);
    const double half = static_cast<double>(n / 2);
    return make(q_min, q_max, n, -half * dp, (half - 1.0) * dp, n);
  }

  void validate() const {
    if (n_q < 4 || n_p < 4 || n_q % 2 || n_p % 2)
      throw PreconditionError("phase grid: point counts must be even and >= 4");
    if (!std::isfinite(q_min) || !std::isfinite(q_max) || !std::isfinite(p_min) || !std::isfinite(p_max) ||
        !(q_max > q_min) || !(p_max > p_min))
      throw PreconditionError("phase grid: extents must be finite and increasing");
  }

  double dq() const { return (q_max - q_min) / static_cast<double>(n_q - 1); }
  double dp() const { return (p_max - p_min) / static_cast<double>(n_p - 1); }
  double q(std::size_t k) const { return q_min + static_cast<double>(k) * dq(); }
  double p(std::size_t j) const { return p_min + static_cast<double>(j) * dp(); }
  std::size_t size() const { return n_q * n_p; }

  bool is_dual(double hbar) const {
    if (n_q != n_p) return false;
    const auto ref = dual(q_min, q_max, n_q, hbar);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)); };
    return close(p_min, ref.p_min) && close(p_max, ref.p_max);
  }

  friend bool operator==(const PhaseGrid&, const PhaseGrid&) = default;
};

enum class DiffScheme { Spectral, FiniteDifference4 };

inline const char* to_string(DiffScheme s) {
  return s == DiffScheme::Spectral ? "spectral" : "fd4";
}

enum class SymbolKind { Operator, State };

inline const char* to_string(SymbolKind k) { return k == SymbolKind::Operator ? "operator" : "state"; }

struct PhaseSpaceField {
  PhaseGrid grid;
  std::vector<Complex> values;  // (q, p), p fastest
  double hbar = 1.0;
  DiffScheme scheme = DiffScheme::Spectral;
  SymbolKind kind = SymbolKind::Operator;
  int star_order = -1;  // truncation order of the series that produced it, -1 if none

  static PhaseSpaceField zeros(const PhaseGrid& g, double hbar, DiffScheme s = DiffScheme::Spectral) {
    g.validate();
    PhaseSpaceField f;
    f.grid = g;
    f.values.assign(g.size(), Complex{});
    f.hbar = hbar;
    f.scheme = s;
    return f;
  }

  template <class Fn>
  static PhaseSpaceField sample(const PhaseGrid& g, double hbar, Fn&& fn, DiffScheme s = DiffScheme::Spectral) {
    auto f = zeros(g, hbar, s);
    for (std::size_t k = 0; k < g.n_q; ++k)
      for (std::size_t j = 0; j < g.n_p; ++j) f.at(k, j) = fn(g.q(k), g.p(j));
    return f;
  }

  Complex& at(std::size_t k, std::size_t j) { return values[k * grid.n_p + j]; }
  const Complex& at(std::size_t k, std::size_t j) const { return values[k * grid.n_p + j]; }

  void check() const {
    grid.validate();
    if (values.size() != grid.size()) throw StructuralError("field: value array does not match the grid");
    if (!(hbar > 0.0)) throw StructuralError("field: hbar must be positive");
    if (!all_finite(values)) throw StructuralError("field: non-finite entries");
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : values) m = std::max(m, std::abs(z));
    return m;
  }
  double max_imag() const {
    double m = 0.0;
    for (const auto& z : values) m = std::max(m, std::abs(z.imag()));
    return m;
  }
};

struct OperatorKernel {
  double q_min = -1.0, q_max = 1.0;
  std::size_t n = 4;
  std::vector<Complex> values;  // (row, col) = <x_row| f |x_col>

  static OperatorKernel zeros(double q_min, double q_max, std::size_t n) {
    return OperatorKernel{q_min, q_max, n, std::vector<Complex>(n * n)};
  }
  double h() const { return (q_max - q_min) / static_cast<double>(n - 1); }
  double x(std::size_t a) const { return q_min + static_cast<double>(a) * h(); }
  Complex& at(std::size_t a, std::size_t b) { return values[a * n + b]; }
  const Complex& at(std::size_t a, std::size_t b) const { return values[a * n + b]; }

  void check() const {
    if (n < 4 || n % 2) throw PreconditionError("kernel: grid size must be even and >= 4");
    if (values.size() != n * n) throw StructuralError("kernel: value array is not n x n");
    if (!(q_max > q_min)) throw PreconditionError("kernel: q extent must be increasing");
    if (!all_finite(values)) throw StructuralError("kernel: non-finite entries");
  }

  /// Discrete identity: delta_{ab} / h.
  static OperatorKernel identity(double q_min, double q_max, std::size_t n) {
    auto k = zeros(q_min, q_max, n);
    for (std::size_t a = 0; a < n; ++a) k.at(a, a) = 1.0 / k.h();
    return k;
  }

  /// |psi><psi| from samples psi(x_a).
  static OperatorKernel projector(double q_min, double q_max, const std::vector<Complex>& psi) {
    auto k = zeros(q_min, q_max, psi.size());
    for (std::size_t a = 0; a < k.n; ++a)
      for (std::size_t b = 0; b < k.n; ++b) k.at(a, b) = psi[a] * std::conj(psi[b]);
    return k;
  }
};

namespace detail {

inline long separation_limit(std::size_t n) { return static_cast<long>(n / 2); }

/// Applies fn to every q-column (fixed momentum index) of an (n_q, n_p) array.
template <class Fn>
void for_columns(std::vector<Complex>& data, std::size_t n_q, std::size_t n_p, Fn&& fn) {
  parallel_for(n_p, [&](std::size_t j) {
    std::vector<Complex> col(n_q);
    for (std::size_t k = 0; k < n_q; ++k) col[k] = data[k * n_p + j];
    fn(col);
    for (std::size_t k = 0; k < n_q; ++k) data[k * n_p + j] = col[k];
  });
}

template <class Fn>
void for_rows(std::vector<Complex>& data, std::size_t n_q, std::size_t n_p, Fn&& fn) {
  parallel_for(n_q, [&](std::size_t k) {
    std::vector<Complex> row(data.begin() + static_cast<long>(k * n_p), data.begin() + static_cast<long>((k + 1) * n_p));
    fn(row);
    std::copy(row.begin(), row.end(), data.begin() + static_cast<long>(k * n_p));
  });
}

/// Band-limited half-cell shift. `to_half`: n samples at integer nodes ->
/// n - 1 samples at the midpoints. Otherwise n - 1 midpoint samples -> n
/// integer-node samples. The straight line through the end samples is
/// removed first and added back afterwards so the periodic extension is
/// continuous; linear data is shifted exactly.
inline std::vector<Complex> shift_half(const std::vector<Complex>& v, bool to_half) {
  const std::size_t m = v.size();
  const std::size_t n = to_half ? m : m + 1;  // periodic length
  const Complex a = v.front(), b = v.back();
  // Data positions in units of h: integer nodes 0..n-1 or midpoints 0.5..n-1.5.
  const double x0 = to_half ? 0.0 : 0.5;
  const double span = static_cast<double>(m - 1);
  auto line = [&](double x) { return a + (b - a) * ((x - x0) / span); };

  std::vector<Complex> r(n, Complex{});
  for (std::size_t i = 0; i < m; ++i) r[i] = v[i] - line(x0 + static_cast<double>(i));
  fft::forward(r);
  const double shift = to_half ? 0.5 : -0.5;
  for (std::size_t k = 0; k < n; ++k) {
    const long s = fft::signed_index(k, n);
    if (n % 2 == 0 && s == static_cast<long>(n / 2)) {
      r[k] = 0.0;
      continue;
    }
    r[k] *= std::polar(1.0, 2.0 * kPi * static_cast<double>(s) * shift / static_cast<double>(n));
  }
  fft::inverse(r);
  const std::size_t out_n = to_half ? m - 1 : m + 1;
  std::vector<Complex> out(out_n);
  for (std::size_t i = 0; i < out_n; ++i) {
    const double x = to_half ? static_cast<double>(i) + 0.5 : static_cast<double>(i);
    out[i] = r[i] + line(x);
  }
  return out;
}

/// Moves an (rows, n_p) array of q-rows by half a cell, column by column.
inline std::vector<Complex> shift_rows_half(const std::vector<Complex>& data, std::size_t rows, std::size_t n_p,
                                            bool to_half) {
  const std::size_t out_rows = to_half ? rows - 1 : rows + 1;
  std::vector<Complex> out(out_rows * n_p);
  parallel_for(n_p, [&](std::size_t j) {
    std::vector<Complex> col(rows);
    for (std::size_t k = 0; k < rows; ++k) col[k] = data[k * n_p + j];
    const auto s = shift_half(col, to_half);
    for (std::size_t k = 0; k < out_rows; ++k) out[k * n_p + j] = s[k];
  });
  return out;
}

/// Kernel entry with midpoint index mid = a + b and separation d = a - b.
inline bool entry_index(std::size_t n, long mid, long d, std::size_t& a, std::size_t& b) {
  const long aa = (mid + d) / 2, bb = (mid - d) / 2;
  if (aa < 0 || bb < 0 || aa >= static_cast<long>(n) || bb >= static_cast<long>(n)) return false;
  a = static_cast<std::size_t>(aa);
  b = static_cast<std::size_t>(bb);
  return true;
}

/// Partial transform over separations of one parity at midpoint index `mid`:
/// h * sum_d K(d) exp(-i p_j d h / hbar) for all dual-grid p_j.
inline std::vector<Complex> row_transform(const OperatorKernel& op, long mid) {
  const std::size_t n = op.n;
  const long lim = separation_limit(n);
  std::vector<Complex> v(n, Complex{});
  for (long d = -lim + 1; d < lim; ++d) {
    if (((d - mid) % 2) != 0) continue;
    std::size_t a, b;
    if (!entry_index(n, mid, d, a, b)) continue;
    const double sign = (d % 2 == 0) ? 1.0 : -1.0;  // (-1)^d from centring p on zero
    v[static_cast<std::size_t>((d + static_cast<long>(n)) % static_cast<long>(n))] = sign * op.at(a, b);
  }
  fft::forward(v);
  for (auto& z : v) z *= op.h();
  return v;
}

inline void row_inverse(std::vector<Complex> spectrum, long mid, OperatorKernel& op) {
  const std::size_t n = op.n;
  const long lim = separation_limit(n);
  fft::inverse(spectrum);
  for (long d = -lim + 1; d < lim; ++d) {
    if (((d - mid) % 2) != 0) continue;
    std::size_t a, b;
    if (!entry_index(n, mid, d, a, b)) continue;
    const double sign = (d % 2 == 0) ? 1.0 : -1.0;
    op.at(a, b) = sign * spectrum[static_cast<std::size_t>((d + static_cast<long>(n)) % static_cast<long>(n))] / op.h();
  }
}

}  // namespace detail

/// Largest |K[a][b]| with |a - b| >= n/2 relative to max |K|. Entries that far
/// apart alias under the dual-grid transform.
inline double aliasing_fraction(const OperatorKernel& op) {
  double peak = 0.0, far = 0.0;
  const auto lim = static_cast<long>(op.n / 2);
  for (std::size_t a = 0; a < op.n; ++a)
    for (std::size_t b = 0; b < op.n; ++b) {
      const double m = std::abs(op.at(a, b));
      peak = std::max(peak, m);
      if (std::labs(static_cast<long>(a) - static_cast<long>(b)) >= lim) far = std::max(far, m);
    }
  return peak > 0 ? far / peak : 0.0;
}

/// Operator symbol of a position-basis kernel on the dual phase grid.
inline PhaseSpaceField wigner_transform(const OperatorKernel& op, double hbar) {
  op.check();
  if (!(hbar > 0.0)) throw PreconditionError("wigner_transform: hbar must be positive");
  const double alias = aliasing_fraction(op);
  if (alias > 1e-10) {
    std::ostringstream os;
    os << "wigner_transform: kernel support reaches half the box (boundary magnitude " << alias
       << " of max); enlarge the position grid";
    throw NumericalError(os.str());
  }
  const std::size_t n = op.n;
  auto field = PhaseSpaceField::zeros(PhaseGrid::dual(op.q_min, op.q_max, n, hbar), hbar);

  std::vector<Complex> even(n * n), odd((n - 1) * n);
  parallel_for(n, [&](std::size_t k) {
    const auto row = detail::row_transform(op, 2 * static_cast<long>(k));
    std::copy(row.begin(), row.end(), even.begin() + static_cast<long>(k * n));
  });
  parallel_for(n - 1, [&](std::size_t k) {
    const auto row = detail::row_transform(op, 2 * static_cast<long>(k) + 1);
    std::copy(row.begin(), row.end(), odd.begin() + static_cast<long>(k * n));
  });
  const auto odd_on_nodes = detail::shift_rows_half(odd, n - 1, n, false);
  for (std::size_t i = 0; i < n * n; ++i) field.values[i] = even[i] + odd_on_nodes[i];
  return field;
}

/// Weyl (symmetric-ordering) quantization; inverse of wigner_transform.
inline OperatorKernel weyl_quantize(const PhaseSpaceField& field) {
  field.check();
  if (!field.grid.is_dual(field.hbar))
    throw PreconditionError("weyl_quantize: momentum grid is not the Fourier dual of the position grid");
  const std::size_t n = field.grid.n_q;
  const std::size_t half = n / 2;
  // Even separations are periodic in j with period n/2, odd ones antiperiodic.
  std::vector<Complex> even(n * n), odd(n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < half; ++j) {
      const Complex lo = field.at(k, j), hi = field.at(k, j + half);
      even[k * n + j] = even[k * n + j + half] = 0.5 * (lo + hi);
      odd[k * n + j] = 0.5 * (lo - hi);
      odd[k * n + j + half] = -0.5 * (lo - hi);
    }
  const auto odd_on_mid = detail::shift_rows_half(odd, n, n, true);

  auto op = OperatorKernel::zeros(field.grid.q_min, field.grid.q_max, n);
  parallel_for(n, [&](std::size_t k) {
    detail::row_inverse(std::vector<Complex>(even.begin() + static_cast<long>(k * n),
                                             even.begin() + static_cast<long>((k + 1) * n)),
                        2 * static_cast<long>(k), op);
  });
  parallel_for(n - 1, [&](std::size_t k) {
    detail::row_inverse(std::vector<Complex>(odd_on_mid.begin() + static_cast<long>(k * n),
                                             odd_on_mid.begin() + static_cast<long>((k + 1) * n)),
                        2 * static_cast<long>(k) + 1, op);
  });
  return op;
}

/// Rescales an operator symbol to a state symbol: rho(phi) = symb(rho) / (2 pi hbar).
inline PhaseSpaceField to_state_symbol(PhaseSpaceField f) {
  const double s = 1.0 / (2.0 * kPi * f.hbar);
  for (auto& z : f.values) z *= s;
  f.kind = SymbolKind::State;
  return f;
}

// ---------------------------------------------------------------------------
// Differentiation

namespace detail {

/// Fourth-order first derivative, centred inside and one-sided (5-point) at
/// the two outermost nodes of each end.
inline std::vector<Complex> fd4_derivative(const std::vector<Complex>& f, double h) {
  const std::size_t n = f.size();
  std::vector<Complex> d(n);
  const double s = 1.0 / (12.0 * h);
  for (std::size_t i = 2; i + 2 < n; ++i) d[i] = s * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
  if (n >= 5) {
    d[0] = s * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = s * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    d[n - 1] = s * (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]);
    d[n - 2] = s * (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]);
  }
  return d;
}

/// Spectral m-th derivative treating the samples as one period of length n h.
inline void spectral_derivative(std::vector<Complex>& f, double h, int order) {
  if (order == 0) return;
  const std::size_t n = f.size();
  fft::forward(f);
  const double base = 2.0 * kPi / (static_cast<double>(n) * h);
  for (std::size_t k = 0; k < n; ++k) {
    const long s = fft::signed_index(k, n);
    if (n % 2 == 0 && s == static_cast<long>(n / 2) && order % 2 == 1) {
      f[k] = 0.0;
      continue;
    }
    f[k] *= std::pow(Complex(0.0, base * static_cast<double>(s)), order);
  }
  fft::inverse(f);
}

}  // namespace detail

/// d^{order_q}/dq d^{order_p}/dp of the field with its own scheme.
inline std::vector<Complex> derivative(const PhaseSpaceField& f, int order_q, int order_p) {
  std::vector<Complex> out = f.values;
  const auto& g = f.grid;
  if (order_q > 0) {
    detail::for_columns(out, g.n_q, g.n_p, [&](std::vector<Complex>& col) {
      if (f.scheme == DiffScheme::Spectral) {
        detail::spectral_derivative(col, g.dq(), order_q);
      } else {
        for (int i = 0; i < order_q; ++i) col = detail::fd4_derivative(col, g.dq());
      }
    });
  }
  if (order_p > 0) {
    detail::for_rows(out, g.n_q, g.n_p, [&](std::vector<Complex>& row) {
      if (f.scheme == DiffScheme::Spectral) {
        detail::spectral_derivative(row, g.dp(), order_p);
      } else {
        for (int i = 0; i < order_p; ++i) row = detail::fd4_derivative(row, g.dp());
      }
    });
  }
  return out;
}

namespace detail {

inline void check_pair(const PhaseSpaceField& f, const PhaseSpaceField& g) {
  f.check();
  g.check();
  if (!(f.grid == g.grid)) throw StructuralError("fields are defined on different grids");
  if (f.hbar != g.hbar) throw StructuralError("fields carry different hbar");
  if (f.scheme != g.scheme) throw StructuralError("fields use different differentiation schemes");
}

inline double binomial(int k, int j) {
  double r = 1.0;
  for (int i = 1; i <= j; ++i) r = r * (k - j + i) / i;
  return r;
}

/// All mixed derivatives up to total order `order`, indexed [a][b].
struct DerivativeTable {
  std::array<std::array<std::vector<Complex>, 5>, 5> d;
};

inline DerivativeTable derivative_table(const PhaseSpaceField& f, int order) {
  DerivativeTable t;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; a + b <= order; ++b) t.d[a][b] = derivative(f, a, b);
  return t;
}

}  // namespace detail

inline constexpr int kMaxStarOrder = 4;

/// Truncated Moyal star product
///   f * g = sum_{k <= order} (i hbar / 2)^k / k! P^k(f, g),
///   P^k(f, g) = sum_j C(k, j) (-1)^j d_q^{k-j} d_p^j f  d_p^{k-j} d_q^j g.
inline PhaseSpaceField star_product(const PhaseSpaceField& f, const PhaseSpaceField& g, int order) {
  if (order < 0 || order > kMaxStarOrder) throw PreconditionError("star_product: order must be in [0, 4]");
  detail::check_pair(f, g);
  const auto df = detail::derivative_table(f, order);
  const auto dg = detail::derivative_table(g, order);
  auto out = PhaseSpaceField::zeros(f.grid, f.hbar, f.scheme);
  out.kind = f.kind;
  out.star_order = order;
  const std::size_t size = f.values.size();
  Complex coeff = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) coeff *= Complex(0.0, 0.5 * f.hbar) / static_cast<double>(k);
    for (int j = 0; j <= k; ++j) {
      const Complex c = coeff * detail::binomial(k, j) * ((j % 2) ? -1.0 : 1.0);
      const auto& a = df.d[k - j][j];
      const auto& b = dg.d[j][k - j];
      for (std::size_t i = 0; i < size; ++i) out.values[i] += c * a[i] * b[i];
    }
  }
  return out;
}

/// {f, g}_mb = (f * g - g * f) / (i hbar), with the same truncation.
inline PhaseSpaceField moyal_bracket(const PhaseSpaceField& f, const PhaseSpaceField& g, int order) {
  const auto fg = star_product(f, g, order);
  const auto gf = star_product(g, f, order);
  auto out = fg;
  const Complex inv = 1.0 / Complex(0.0, f.hbar);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = (fg.values[i] - gf.values[i]) * inv;
  return out;
}

/// {f, g}_pb = d_q f d_p g - d_p f d_q g.
inline PhaseSpaceField poisson_bracket(const PhaseSpaceField& f, const PhaseSpaceField& g) {
  detail::check_pair(f, g);
  const auto fq = derivative(f, 1, 0), fp = derivative(f, 0, 1);
  const auto gq = derivative(g, 1, 0), gp = derivative(g, 0, 1);
  auto out = PhaseSpaceField::zeros(f.grid, f.hbar, f.scheme);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = fq[i] * gp[i] - fp[i] * gq[i];
  return out;
}

/// Integral rho(phi) O(phi) dq dp by the 2-D trapezoid rule.
inline double pairing(const PhaseSpaceField& rho, const PhaseSpaceField& obs) {
  rho.check();
  obs.check();
  if (!(rho.grid == obs.grid)) throw StructuralError("pairing: fields are defined on different grids");
  const auto& g = rho.grid;
  const auto wq = trapezoid_weights(g.n_q, g.dq());
  const auto wp = trapezoid_weights(g.n_p, g.dp());
  double total = 0.0;
  for (std::size_t k = 0; k < g.n_q; ++k) {
    double row = 0.0;
    for (std::size_t j = 0; j < g.n_p; ++j) row += wp[j] * (rho.at(k, j) * obs.at(k, j)).real();
    total += wq[k] * row;
  }
  return total;
}

/// Tr(A B) = sum_ab A[a][b] B[b][a] h^2 for kernels on the same grid.
inline Complex kernel_trace_product(const OperatorKernel& a, const OperatorKernel& b) {
  if (a.n != b.n || a.q_min != b.q_min || a.q_max != b.q_max) throw StructuralError("kernels use different grids");
  Complex total{};
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < a.n; ++j) total += a.at(i, j) * b.at(j, i);
  return total * a.h() * a.h();
}

}  // namespace sid::wigner
