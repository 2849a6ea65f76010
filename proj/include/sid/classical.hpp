#pragma once

// Chart-local action-angle data, configuration volumes, the classical
// statistical-limit density and trajectory extraction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sid/charts.hpp"
#include "sid/common.hpp"
#include "sid/dynamics.hpp"
#include "sid/spectral.hpp"
#include "sid/wigner.hpp"

namespace sid::classical {

using dynamics::PhasePoint;

struct Level {
  double energy = 0.0;
  double label = 0.0;  // momentum label P; unused for one degree of freedom
};

struct OrbitRecord {
  Level level;
  bool reachable = false;
  std::string reason;         // why the level is unreachable
  double period = 0.0;        // closure time T
  double action = 0.0;        // J
  double frequency = 0.0;     // finite-difference dH/dJ across levels
  double volume = 0.0;        // time spent inside the chart
  double diameter = 0.0;
  double closure_error = 0.0; // |x(T) - x(0)| / diameter
  double resolution = 0.0;    // max |grad H| on the orbit; multiply by a cell size
  std::vector<double> times;
  std::vector<PhasePoint> points;

  double angular_rate() const { return 2.0 * kPi / period; }
};

struct ActionAngleChart {
  charts::Chart chart;
  double step = 1e-3;
  std::vector<OrbitRecord> orbits;
  bool action_monotone = true;

  const OrbitRecord& orbit(std::size_t i) const {
    if (i >= orbits.size()) throw PreconditionError("level index out of range");
    return orbits[i];
  }
};

struct OrbitOptions {
  double step = 1e-3;
  double max_time = 1e3;
};

namespace detail {

/// Which side of the section (modulo the angle period) a coordinate lies on;
/// it changes by `direction` exactly when the section is crossed in that
/// direction.
inline long section_cell(double q, const charts::Section& s, double period) {
  const double u = q - s.q;
  if (period > 0.0) return s.direction > 0 ? static_cast<long>(std::floor(u / period))
                                           : static_cast<long>(std::ceil(u / period));
  return s.direction > 0 ? (u >= 0.0 ? 0 : -1) : (u > 0.0 ? 1 : 0);
}

/// Root in [t1, t2] of the quadratic through (t0,s0), (t1,s1), (t2,s2).
inline double quadratic_root(double t0, double s0, double t1, double s1, double t2, double s2) {
  const double d01 = (s1 - s0) / (t1 - t0);
  const double d12 = (s2 - s1) / (t2 - t1);
  const double c = (d12 - d01) / (t2 - t0);
  // s(t) = s1 + b (t - t1) + c (t - t1)(t - t2)
  const double b = d12;
  auto eval = [&](double t) { return s1 + b * (t - t1) + c * (t - t1) * (t - t2); };
  double lo = t1, hi = t2;
  double flo = eval(lo);
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = eval(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline PhasePoint advance(const dynamics::System& sys, PhasePoint x, double dt) {
  dynamics::Symplectic4 integ(sys);
  integ.step(x, dt);
  return x;
}

inline double distance(const PhasePoint& a, const PhasePoint& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Seed on the section q_1 = q_s with sign(p_1) = direction, other dofs at rest.
inline std::optional<PhasePoint> seed(const dynamics::System& sys, const charts::Section& s, double energy) {
  PhasePoint x(2 * sys.dof, 0.0);
  x[0] = s.q;
  const double v = sys.potential(std::span<const double>(x.data(), sys.dof));
  if (energy < v) return std::nullopt;
  x[sys.dof] = s.direction * std::sqrt(2.0 * (energy - v));
  return x;
}

inline OrbitRecord trace_orbit(const charts::Chart& chart, const Level& level, const OrbitOptions& opt) {
  const auto& sys = chart.system;
  OrbitRecord rec;
  rec.level = level;
  if (sys.dof != 1) {
    rec.reason = "action-angle construction needs one degree of freedom per chart";
    return rec;
  }
  const auto x0 = seed(sys, chart.section, level.energy);
  if (!x0) {
    rec.reason = "level set does not meet the section";
    return rec;
  }
  if (!chart.contains(*x0)) {
    rec.reason = "level set does not intersect the chart at the section";
    return rec;
  }
  const double h = opt.step;
  const double period_q = sys.q_period;
  const charts::Section& sec = chart.section;
  dynamics::Symplectic4 integ(sys);

  PhasePoint x = *x0;
  rec.times.push_back(0.0);
  rec.points.push_back(x);
  long cell = section_cell(x[0], sec, period_q);
  const auto max_steps = static_cast<std::size_t>(opt.max_time / h);
  for (std::size_t k = 1; k <= max_steps; ++k) {
    integ.step(x, h);
    const double t = static_cast<double>(k) * h;
    const long next = section_cell(x[0], sec, period_q);
    if (next - cell != sec.direction || k < 2) {
      cell = next;
      rec.times.push_back(t);
      rec.points.push_back(x);
      continue;
    }
    // Crossed the section: target value of q_1 in unwrapped coordinates.
    const double target = sec.q + (period_q > 0.0 ? static_cast<double>(next) * period_q : 0.0);
    const auto& xm = rec.points[rec.points.size() - 2];
    const auto& xk = rec.points.back();
    const double tk = rec.times.back();
    double tc = quadratic_root(rec.times[rec.times.size() - 2], xm[0] - target, tk, xk[0] - target, t, x[0] - target);
    // Polish with Newton steps on the integrated flow from the last sample.
    for (int it = 0; it < 3; ++it) {
      const auto y = advance(sys, xk, tc - tk);
      if (y[1] == 0.0) break;
      tc -= (y[0] - target) / y[1];
    }
    auto end = advance(sys, xk, tc - tk);
    rec.period = tc;
    rec.times.push_back(tc);
    rec.points.push_back(end);
    break;
  }
  if (rec.period <= 0.0) {
    rec.reason = "orbit did not close within the step budget";
    rec.times.clear();
    rec.points.clear();
    return rec;
  }
  // Compare the closing state with the seed, modulo the angle period.
  PhasePoint end = rec.points.back();
  if (period_q > 0.0) end[0] = x0->at(0) + std::remainder(end[0] - x0->at(0), period_q);
  double qmin = INFINITY, qmax = -INFINITY, pmin = INFINITY, pmax = -INFINITY;
  for (const auto& pt : rec.points) {
    qmin = std::min(qmin, pt[0]);
    qmax = std::max(qmax, pt[0]);
    pmin = std::min(pmin, pt[1]);
    pmax = std::max(pmax, pt[1]);
  }
  rec.diameter = std::hypot(qmax - qmin, pmax - pmin);
  rec.closure_error = distance(end, *x0) / rec.diameter;

  // J = (1/2pi) closed integral of p dq = (1/2pi) integral of p dH/dp dt.
  double area = 0.0, inside = 0.0, grad = 0.0;
  std::vector<double> g(2);
  for (std::size_t k = 0; k + 1 < rec.points.size(); ++k) {
    const auto& a = rec.points[k];
    const auto& b = rec.points[k + 1];
    const double dt = rec.times[k + 1] - rec.times[k];
    area += 0.5 * dt * (a[1] * a[1] + b[1] * b[1]);
    const double ma = chart.margin(a), mb = chart.margin(b);
    const bool ia = chart.contains(a), ib = chart.contains(b);
    if (ia && ib) {
      inside += dt;
    } else if (ia != ib) {
      const double frac = ma / (ma - mb);  // fraction of the segment before the crossing
      inside += dt * (ia ? frac : 1.0 - frac);
    }
    grad = std::max(grad, sys.gradient_norm(a));
  }
  rec.action = area / (2.0 * kPi);
  rec.volume = inside;
  rec.resolution = grad;
  rec.reachable = true;
  return rec;
}

}  // namespace detail

inline constexpr double kClosureTolerance = 1e-6;

/// Traces every level by fixed-step symplectic integration until it returns
/// to the chart's section.
inline ActionAngleChart build_action_angle(const charts::Chart& chart, const std::vector<Level>& levels,
                                           const OrbitOptions& opt = {}) {
  if (!(opt.step > 0.0)) throw PreconditionError("build_action_angle: step must be positive");
  ActionAngleChart aa{chart, opt.step, std::vector<OrbitRecord>(levels.size()), true};
  parallel_for(levels.size(), [&](std::size_t i) { aa.orbits[i] = detail::trace_orbit(chart, levels[i], opt); });
  for (auto& r : aa.orbits)
    if (r.reachable && r.closure_error >= kClosureTolerance) {
      r.reachable = false;
      r.reason = "orbit polyline does not close";
    }
  // dH/dJ by finite differences over the reachable levels sorted by energy.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < aa.orbits.size(); ++i)
    if (aa.orbits[i].reachable) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return aa.orbits[a].level.energy < aa.orbits[b].level.energy; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& r = aa.orbits[order[k]];
    if (order.size() == 1) {
      r.frequency = r.angular_rate();
      continue;
    }
    const auto& lo = aa.orbits[order[k == 0 ? 0 : k - 1]];
    const auto& hi = aa.orbits[order[k + 1 == order.size() ? k : k + 1]];
    r.frequency = (hi.level.energy - lo.level.energy) / (hi.action - lo.action);
    if (k > 0 && !(r.action > aa.orbits[order[k - 1]].action)) aa.action_monotone = false;
  }
  return aa;
}

/// Time the orbit spends inside the chart; equals T for orbits fully inside.
inline double configuration_volume(const ActionAngleChart& aa, std::size_t level) {
  const auto& r = aa.orbit(level);
  if (!r.reachable) throw PreconditionError("configuration_volume: level is unreachable (" + r.reason + ")");
  return r.volume;
}

/// Separable systems: product of the per-dof volumes.
inline double configuration_volume(const std::vector<const ActionAngleChart*>& factors,
                                   const std::vector<std::size_t>& levels) {
  if (factors.size() != levels.size()) throw StructuralError("configuration_volume: one level per factor");
  double v = 1.0;
  for (std::size_t i = 0; i < factors.size(); ++i) v *= configuration_volume(*factors[i], levels[i]);
  return v;
}

/// Angle 2 pi t / T of the orbit point nearest to x.
inline double angle_of(const ActionAngleChart& aa, std::size_t level, const PhasePoint& x) {
  const auto& r = aa.orbit(level);
  if (!r.reachable) throw PreconditionError("angle_of: level is unreachable");
  const std::size_t n = r.points.size() - 1;  // last point duplicates the seed
  auto dist2 = [&](std::size_t k) {
    double dq = r.points[k][0] - x[0];
    if (aa.chart.system.q_period > 0.0) dq = std::remainder(dq, aa.chart.system.q_period);
    const double dp = r.points[k][1] - x[1];
    return dq * dq + dp * dp;
  };
  const std::size_t stride = 16;
  std::size_t best = 0;
  double bd = INFINITY;
  for (std::size_t k = 0; k < n; k += stride)
    if (const double d = dist2(k); d < bd) {
      bd = d;
      best = k;
    }
  const std::size_t lo = best >= stride ? best - stride : 0, hi = std::min(n, best + stride);
  // Wrap-around near the seed is covered by also scanning the tail.
  for (std::size_t k = lo; k < hi; ++k)
    if (const double d = dist2(k); d < bd) {
      bd = d;
      best = k;
    }
  for (std::size_t k = n > stride ? n - stride : 0; k < n; ++k)
    if (const double d = dist2(k); d < bd) {
      bd = d;
      best = k;
    }
  // Newton on tau: minimize |x(t_k + tau) - x|^2 along the flow.
  const auto& sys = aa.chart.system;
  double tau = 0.0;
  std::vector<double> g(2);
  for (int it = 0; it < 3; ++it) {
    const auto y = tau == 0.0 ? r.points[best] : detail::advance(sys, r.points[best], tau);
    sys.gradient(y, g);
    const double vq = g[1], vp = -g[0];
    double dq = y[0] - x[0];
    if (sys.q_period > 0.0) dq = std::remainder(dq, sys.q_period);
    const double dp = y[1] - x[1];
    const double v2 = vq * vq + vp * vp;
    if (v2 == 0.0) break;
    tau -= (dq * vq + dp * vp) / v2;
  }
  double t = r.times[best] + tau;
  t = std::fmod(t, r.period);
  if (t < 0) t += r.period;
  return 2.0 * kPi * t / r.period;
}

// ---------------------------------------------------------------------------
// Statistical limit

struct LevelWeight {
  std::size_t chart = 0;  // index into the ActionAngleChart list
  std::size_t level = 0;  // index into that chart's orbit table
  double mass = 0.0;      // integral of rho_{chart}(w, p) over this level's cell
};

struct ClassicalDensity {
  wigner::PhaseSpaceField field;
  std::vector<LevelWeight> weights;
  std::vector<double> volumes;  // per weight entry
  double smearing = 0.0;
  double integral = 0.0;
  double min_value = 0.0;
};

inline constexpr double kNonnegativityFloor = -1e-10;
inline constexpr double kWeightSumTolerance = 1e-10;

/// Smearing-width floor for a level: the energy change across one grid cell
/// on its orbit.
inline double energy_resolution(const OrbitRecord& r, const wigner::PhaseGrid& g) {
  return r.resolution * std::max(g.dq(), g.dp());
}

/// rho*(phi) = sum of mass / C * gaussian_sigma(H(phi) - w) * I_chart(phi).
/// smearing <= 0 selects the default of four resolution units.
inline ClassicalDensity classical_density(const std::vector<LevelWeight>& weights,
                                          const std::vector<ActionAngleChart>& charts, const wigner::PhaseGrid& grid,
                                          double smearing) {
  grid.validate();
  double total = 0.0;
  double floor = 0.0;
  for (const auto& w : weights) {
    if (w.chart >= charts.size()) throw StructuralError("classical_density: chart index out of range");
    if (w.mass < 0.0) throw PreconditionError("classical_density: negative weight");
    if (charts[w.chart].chart.system.dof != 1) throw PreconditionError("classical_density: one degree of freedom only");
    total += w.mass;
    if (w.mass > 0.0) floor = std::max(floor, energy_resolution(charts[w.chart].orbit(w.level), grid));
  }
  const bool empty = std::all_of(weights.begin(), weights.end(), [](const auto& w) { return w.mass == 0.0; });
  if (!empty && std::abs(total - 1.0) > kWeightSumTolerance)
    throw PreconditionError("classical_density: weights sum to " + std::to_string(total) + ", not 1");
  const double sigma = smearing > 0.0 ? smearing : 4.0 * floor;
  if (!empty && sigma < floor)
    throw PreconditionError("classical_density: smearing width " + std::to_string(sigma) +
                            " is below the grid resolution " + std::to_string(floor));

  ClassicalDensity d;
  d.field = wigner::PhaseSpaceField::zeros(grid, 1.0, wigner::DiffScheme::FiniteDifference4);
  d.field.kind = wigner::SymbolKind::State;
  d.weights = weights;
  d.smearing = sigma;
  for (const auto& w : weights) d.volumes.push_back(w.mass > 0.0 ? configuration_volume(charts[w.chart], w.level) : 0.0);
  if (empty) return d;

  const double norm = 1.0 / (sigma * std::sqrt(2.0 * kPi));
  parallel_for(grid.n_q, [&](std::size_t k) {
    for (std::size_t j = 0; j < grid.n_p; ++j) {
      const double x[2] = {grid.q(k), grid.p(j)};
      double v = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto& w = weights[i];
        if (w.mass == 0.0) continue;
        const auto& aa = charts[w.chart];
        if (!aa.chart.contains(x)) continue;
        const double e = (aa.chart.system.energy(x) - aa.orbit(w.level).level.energy) / sigma;
        v += w.mass / d.volumes[i] * norm * std::exp(-0.5 * e * e);
      }
      d.field.at(k, j) = v;
    }
  });
  d.integral = wigner::pairing(d.field, wigner::PhaseSpaceField::sample(grid, 1.0, [](double, double) { return 1.0; },
                                                                        d.field.scheme));
  d.min_value = INFINITY;
  for (const auto& v : d.field.values) d.min_value = std::min(d.min_value, v.real());
  if (!all_finite(d.field.values)) throw NumericalError("classical_density: non-finite values");
  return d;
}

/// Maps pointer channel m to a chart; the level energy is the grid energy.
struct LevelMap {
  std::vector<std::size_t> channel_chart;
};

struct DecoheredClassical {
  ClassicalDensity density;
  std::vector<ActionAngleChart> charts;
  std::vector<std::string> unreachable;
};

inline constexpr double kDiagonalTolerance = 1e-12;

/// Weights are the pointer eigenvalues times the trapezoid weight of their
/// energy node.
inline DecoheredClassical decohered_to_classical(const spectral::VanHoveState& state, const LevelMap& map,
                                                 const std::vector<charts::Chart>& chart_list,
                                                 const wigner::PhaseGrid& grid, double smearing,
                                                 const OrbitOptions& opt = {}) {
  const auto& k = state.kernel;
  k.check_shape();
  if (!k.regular_is_zero()) throw PreconditionError("decohered_to_classical: regular part is nonzero; decohere first");
  double peak = 0.0, off = 0.0;
  for (std::size_t i = 0; i < k.grid.n_points; ++i)
    for (std::size_t m = 0; m < k.n_channels; ++m)
      for (std::size_t n = 0; n < k.n_channels; ++n) {
        const double a = std::abs(k.sing(i, m, n));
        (m == n ? peak : off) = std::max(m == n ? peak : off, a);
      }
  if (off > kDiagonalTolerance * std::max(1.0, peak))
    throw PreconditionError("decohered_to_classical: singular part is not diagonal; apply the pointer basis first");
  if (map.channel_chart.size() != k.n_channels) throw StructuralError("decohered_to_classical: one chart per channel");
  for (auto c : map.channel_chart)
    if (c >= chart_list.size()) throw StructuralError("decohered_to_classical: chart index out of range");

  const auto nodes = k.grid.nodes();
  const auto w = k.grid.weights();
  DecoheredClassical out;
  std::vector<std::vector<Level>> levels(chart_list.size());
  struct Pending {
    std::size_t chart, level;
    double mass;
  };
  std::vector<Pending> pending;
  for (std::size_t i = 0; i < k.grid.n_points; ++i)
    for (std::size_t m = 0; m < k.n_channels; ++m) {
      const double mass = w[i] * k.sing(i, m, m).real();
      if (mass == 0.0) continue;
      const auto c = map.channel_chart[m];
      pending.push_back({c, levels[c].size(), mass});
      levels[c].push_back({nodes[i], static_cast<double>(m)});
    }
  for (std::size_t c = 0; c < chart_list.size(); ++c) out.charts.push_back(build_action_angle(chart_list[c], levels[c], opt));
  std::vector<LevelWeight> weights;
  for (const auto& p : pending) {
    const auto& r = out.charts[p.chart].orbits[p.level];
    if (!r.reachable) {
      out.unreachable.push_back(out.charts[p.chart].chart.label + " @ H=" + std::to_string(r.level.energy) + ": " + r.reason);
      continue;
    }
    weights.push_back({p.chart, p.level, p.mass});
  }
  if (!out.unreachable.empty())
    throw PreconditionError("decohered_to_classical: weighted levels are unreachable: " + out.unreachable.front());
  out.density = classical_density(weights, out.charts, grid, smearing);
  return out;
}

/// Spectral side of the duality: sum_i w_i sum_m rho(w_i)_mm O(w_i)_mm.
inline double spectral_pairing(const spectral::VanHoveState& state, const spectral::VanHoveObservable& obs) {
  spectral::detail::check_compatible(state.kernel, obs.kernel);
  const auto w = state.kernel.grid.weights();
  double s = 0.0;
  for (std::size_t i = 0; i < state.kernel.grid.n_points; ++i)
    for (std::size_t m = 0; m < state.kernel.n_channels; ++m)
      s += w[i] * (state.kernel.sing(i, m, m) * obs.kernel.sing(i, m, m)).real();
  return s;
}

/// Phase-space side: the symbol of f(H) is f(H(phi)) on each chart.
template <class Fn>
double phase_pairing(const ClassicalDensity& d, const dynamics::System& sys, Fn&& observable) {
  const auto sym = wigner::PhaseSpaceField::sample(
      d.field.grid, 1.0,
      [&](double q, double p) {
        const double x[2] = {q, p};
        return observable(sys.energy(x));
      },
      d.field.scheme);
  return wigner::pairing(d.field, sym);
}

/// 2 sum_k |M_k|, M_k the normalized angular Fourier moments of the density
/// around one level; bounds the relative deviation from uniformity.
inline double angular_nonuniformity(const ClassicalDensity& d, const ActionAngleChart& aa, std::size_t level,
                                    int harmonics = 16) {
  const auto& g = d.field.grid;
  double peak = d.field.max_abs();
  std::vector<Complex> moments(static_cast<std::size_t>(harmonics), 0.0);
  double mass = 0.0;
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double v = d.field.at(k, j).real();
      if (v < 1e-14 * peak) continue;
      const double theta = angle_of(aa, level, {g.q(k), g.p(j)});
      mass += v;
      for (int h = 1; h <= harmonics; ++h) moments[h - 1] += v * std::polar(1.0, -h * theta);
    }
  double s = 0.0;
  for (const auto& m : moments) s += std::abs(m) / mass;
  return 2.0 * s;
}

// ---------------------------------------------------------------------------
// Trajectories

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> states;
  std::vector<double> energy;
  std::vector<std::vector<double>> conserved;  // one column per constant
  std::vector<std::string> constant_names;
  bool exited_chart = false;
  double energy_drift = 0.0;  // max |H(t) - H(0)|
};

inline constexpr double kEnergyDriftTolerance = 1e-8;

/// Fixed-step integration from x0, recording H and the given constants.
inline Trajectory integrate_trajectory(const dynamics::System& sys, const PhasePoint& x0, double duration, double step,
                                       const std::vector<dynamics::Constant>& constants = {},
                                       const charts::Chart* chart = nullptr) {
  if (x0.size() != 2 * sys.dof) throw StructuralError("integrate_trajectory: phase point has the wrong dimension");
  if (!(step > 0.0) || duration < 0.0) throw PreconditionError("integrate_trajectory: needs step > 0 and duration >= 0");
  Trajectory tr;
  for (const auto& c : constants) tr.constant_names.push_back(c.name);
  tr.conserved.resize(constants.size());
  auto record = [&](double t, const PhasePoint& x) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.energy.push_back(sys.energy(x));
    for (std::size_t c = 0; c < constants.size(); ++c) tr.conserved[c].push_back(constants[c].value(x));
    if (chart && !chart->contains(x)) tr.exited_chart = true;
  };
  PhasePoint x = x0;
  record(0.0, x);
  const auto steps = static_cast<std::size_t>(std::llround(duration / step));
  dynamics::Symplectic4 integ(sys);
  for (std::size_t k = 1; k <= steps; ++k) {
    integ.step(x, step);
    record(static_cast<double>(k) * step, x);
  }
  for (double e : tr.energy) tr.energy_drift = std::max(tr.energy_drift, std::abs(e - tr.energy.front()));
  if (!all_finite(tr.energy)) throw NumericalError("integrate_trajectory: non-finite state");
  return tr;
}

/// Starts on the level's orbit at angle tau0 (radians along the orbit).
/// theta0 holds the remaining angles and must be empty for 1-dof charts.
inline Trajectory sample_trajectory(const ActionAngleChart& aa, std::size_t level, double tau0,
                                    const std::vector<double>& theta0, double duration, double step) {
  const auto& r = aa.orbit(level);
  if (!r.reachable) throw PreconditionError("sample_trajectory: level is unreachable (" + r.reason + ")");
  if (!theta0.empty()) throw PreconditionError("sample_trajectory: extra angles need a multi-dof chart");
  const auto& sys = aa.chart.system;
  double t0 = std::fmod(tau0 / (2.0 * kPi) * r.period, r.period);
  if (t0 < 0) t0 += r.period;
  // Nearest stored sample at or before t0, then one exact partial step.
  const auto it = std::upper_bound(r.times.begin(), r.times.end(), t0);
  const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - r.times.begin()) - 1));
  PhasePoint x = r.points[k];
  if (t0 > r.times[k]) x = detail::advance(sys, x, t0 - r.times[k]);
  if (sys.q_period > 0.0) x[0] = std::remainder(x[0], sys.q_period);
  return integrate_trajectory(sys, x, duration, step, aa.chart.constants, &aa.chart);
}

// ---------------------------------------------------------------------------
// Flow invariance

namespace detail {

/// 6-point Lagrange weights for fractional offset s in [0, 1) relative to
/// stencil node 2 (nodes at -2..3).
inline void lagrange6(double s, double w[6]) {
  for (int a = 0; a < 6; ++a) {
    double v = 1.0;
    for (int b = 0; b < 6; ++b)
      if (b != a) v *= (s - (b - 2)) / static_cast<double>(a - b);
    w[a] = v;
  }
}

inline double interpolate(const wigner::PhaseSpaceField& f, double q, double p) {
  const auto& g = f.grid;
  const double uq = (q - g.q_min) / g.dq(), up = (p - g.p_min) / g.dp();
  const auto iq = static_cast<long>(std::floor(uq)), ip = static_cast<long>(std::floor(up));
  if (iq - 2 < 0 || ip - 2 < 0 || iq + 3 >= static_cast<long>(g.n_q) || ip + 3 >= static_cast<long>(g.n_p))
    throw PreconditionError("density_flow_invariance: a flowed point left the grid");
  double wq[6], wp[6];
  lagrange6(uq - static_cast<double>(iq), wq);
  lagrange6(up - static_cast<double>(ip), wp);
  double v = 0.0;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      v += wq[a] * wp[b] * f.at(static_cast<std::size_t>(iq - 2 + a), static_cast<std::size_t>(ip - 2 + b)).real();
  return v;
}

}  // namespace detail

struct FlowOptions {
  double step = 1e-3;
  std::size_t stride = 4;           // sample every stride-th grid point per axis
  double support_fraction = 1e-3;   // ignore points below this fraction of the peak
};

/// max |rho(flowed) - rho(start)| / max |rho| over sampled grid points in the
/// central half of the grid.
inline double density_flow_invariance(const wigner::PhaseSpaceField& density, const dynamics::System& sys,
                                      double t_probe, const FlowOptions& opt = {}) {
  density.check();
  if (sys.dof != 1) throw PreconditionError("density_flow_invariance: one degree of freedom only");
  const auto& g = density.grid;
  const double peak = density.max_abs();
  if (peak == 0.0) return 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> samples;
  for (std::size_t k = g.n_q / 4; k < 3 * g.n_q / 4; k += opt.stride)
    for (std::size_t j = g.n_p / 4; j < 3 * g.n_p / 4; j += opt.stride)
      if (std::abs(density.at(k, j)) >= opt.support_fraction * peak) samples.emplace_back(k, j);
  std::vector<double> drift(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    auto [k, j] = samples[s];
    const auto tr = integrate_trajectory(sys, {g.q(k), g.p(j)}, t_probe, opt.step);
    const auto& y = tr.states.back();
    drift[s] = std::abs(detail::interpolate(density, y[0], y[1]) - density.at(k, j).real());
  });
  double worst = 0.0;
  for (double d : drift) worst = std::max(worst, d);
  return worst / peak;
}

inline double density_flow_invariance(const ClassicalDensity& d, const dynamics::System& sys, double t_probe,
                                      const FlowOptions& opt = {}) {
  return density_flow_invariance(d.field, sys, t_probe, opt);
}

}  // namespace sid::classical
