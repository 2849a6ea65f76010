#pragma once

// Phase-space charts: disjoint domains with 0/1 index functions that sum to
// one, chart-local constants of motion, and involution checks.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sid/common.hpp"
#include "sid/dynamics.hpp"
#include "sid/wigner.hpp"

namespace sid::charts {

using dynamics::PhasePoint;

enum class PredicateKind { EnergyWindow, HalfPlane, Rectangle, SeparatrixSide };

inline const char* to_string(PredicateKind k) {
  switch (k) {
    case PredicateKind::EnergyWindow: return "energy-window";
    case PredicateKind::HalfPlane: return "half-plane";
    case PredicateKind::Rectangle: return "rectangle";
    case PredicateKind::SeparatrixSide: return "separatrix-side";
  }
  return "?";
}

/// Domain test expressed as a signed margin (positive inside). Points with
/// margin exactly zero belong to the domain iff include_boundary is set.
struct Predicate {
  PredicateKind kind = PredicateKind::Rectangle;
  bool include_boundary = true;
  // energy-window
  double energy_lo = 0.0, energy_hi = 0.0;
  // half-plane: normal . x - offset
  std::vector<double> normal;
  double offset = 0.0;
  // rectangle: per coordinate [lower, upper]
  std::vector<double> lower, upper;
  // separatrix-side: inside (H < E_s) or outside, optionally one sign of p_1
  bool inside = true;
  int momentum_sign = 0;

  static Predicate energy_window(double lo, double hi, bool include_boundary = true) {
    Predicate p;
    p.kind = PredicateKind::EnergyWindow;
    p.energy_lo = lo;
    p.energy_hi = hi;
    p.include_boundary = include_boundary;
    return p;
  }
  static Predicate half_plane(std::vector<double> normal, double offset, bool include_boundary = true) {
    Predicate p;
    p.kind = PredicateKind::HalfPlane;
    p.normal = std::move(normal);
    p.offset = offset;
    p.include_boundary = include_boundary;
    return p;
  }
  static Predicate rectangle(std::vector<double> lower, std::vector<double> upper, bool include_boundary = true) {
    Predicate p;
    p.kind = PredicateKind::Rectangle;
    p.lower = std::move(lower);
    p.upper = std::move(upper);
    p.include_boundary = include_boundary;
    return p;
  }
  static Predicate separatrix_side(bool inside, int momentum_sign = 0, bool include_boundary = false) {
    Predicate p;
    p.kind = PredicateKind::SeparatrixSide;
    p.inside = inside;
    p.momentum_sign = momentum_sign;
    p.include_boundary = include_boundary;
    return p;
  }
};

struct Section {
  double q = 0.0;     // orbits are seeded and closed on q_1 = q
  int direction = 1;  // sign of p_1 at the seed
};

struct Chart {
  std::string label;
  Predicate predicate;
  int priority = 0;
  std::vector<dynamics::Constant> constants;  // P_{chart, I}; H is global
  Section section;
  dynamics::System system;

  double margin(std::span<const double> x) const {
    const auto& pr = predicate;
    switch (pr.kind) {
      case PredicateKind::EnergyWindow: {
        const double e = system.energy(x);
        return std::min(e - pr.energy_lo, pr.energy_hi - e);
      }
      case PredicateKind::HalfPlane: {
        if (pr.normal.size() != x.size()) throw PreconditionError("half-plane normal has the wrong dimension");
        double s = -pr.offset;
        for (std::size_t i = 0; i < x.size(); ++i) s += pr.normal[i] * x[i];
        return s;
      }
      case PredicateKind::Rectangle: {
        if (pr.lower.size() != x.size() || pr.upper.size() != x.size())
          throw PreconditionError("rectangle bounds have the wrong dimension");
        double m = INFINITY;
        for (std::size_t i = 0; i < x.size(); ++i) m = std::min({m, x[i] - pr.lower[i], pr.upper[i] - x[i]});
        return m;
      }
      case PredicateKind::SeparatrixSide: {
        if (!system.separatrix) throw PreconditionError("system '" + system.name + "' has no separatrix");
        const double e = system.energy(x);
        double m = pr.inside ? *system.separatrix - e : e - *system.separatrix;
        if (pr.momentum_sign != 0) m = std::min(m, pr.momentum_sign * x[system.dof]);
        return m;
      }
    }
    return -1.0;
  }

  bool contains(std::span<const double> x) const {
    const double m = margin(x);
    return m > 0.0 || (m == 0.0 && predicate.include_boundary);
  }
};

/// Regular lattice over the 2N phase coordinates (q_1..q_N, p_1..p_N).
struct Lattice {
  std::vector<double> lo, hi;
  std::vector<std::size_t> n;

  static Lattice from_grid(const wigner::PhaseGrid& g) { return {{g.q_min, g.p_min}, {g.q_max, g.p_max}, {g.n_q, g.n_p}}; }

  std::size_t dims() const { return n.size(); }
  std::size_t dof() const { return n.size() / 2; }
  double step(std::size_t axis) const { return (hi[axis] - lo[axis]) / static_cast<double>(n[axis] - 1); }
  std::size_t size() const {
    std::size_t s = 1;
    for (auto k : n) s *= k;
    return s;
  }
  /// Row-major multi-index, last axis fastest.
  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(n.size());
    for (std::size_t a = n.size(); a-- > 0;) {
      idx[a] = flat % n[a];
      flat /= n[a];
    }
    return idx;
  }
  std::size_t flatten(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (std::size_t a = 0; a < n.size(); ++a) f = f * n[a] + idx[a];
    return f;
  }
  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < n.size(); ++a) s *= n[a];
    return s;
  }
  PhasePoint point(std::size_t flat) const {
    const auto idx = unflatten(flat);
    PhasePoint x(n.size());
    for (std::size_t a = 0; a < n.size(); ++a) x[a] = lo[a] + static_cast<double>(idx[a]) * step(a);
    return x;
  }
  void validate() const {
    if (n.empty() || n.size() % 2 || lo.size() != n.size() || hi.size() != n.size())
      throw PreconditionError("lattice: needs matching bounds for 2N axes");
    for (std::size_t a = 0; a < n.size(); ++a)
      if (n[a] < 4 || n[a] % 2 || !(hi[a] > lo[a])) throw PreconditionError("lattice: axes need even n >= 4");
  }
};

struct LatticeField {
  Lattice lattice;
  std::vector<double> values;

  template <class Fn>
  static LatticeField sample(const Lattice& l, Fn&& fn) {
    l.validate();
    LatticeField f{l, std::vector<double>(l.size())};
    parallel_for(l.size(), [&](std::size_t i) { f.values[i] = fn(std::span<const double>(l.point(i))); });
    return f;
  }
};

// ---------------------------------------------------------------------------

/// 1 where the chart's domain holds, 0 elsewhere.
inline std::vector<int> index_function(const Chart& chart, const std::vector<PhasePoint>& points) {
  std::vector<int> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = chart.contains(points[i]) ? 1 : 0;
  return out;
}

inline std::vector<int> index_function(const Chart& chart, const Lattice& lattice) {
  std::vector<int> out(lattice.size());
  parallel_for(lattice.size(), [&](std::size_t i) { out[i] = chart.contains(lattice.point(i)) ? 1 : 0; });
  return out;
}

struct Partition {
  std::vector<Chart> charts;
  Lattice lattice;

  /// Charts in ascending priority value (0 = highest).
  std::vector<const Chart*> by_priority() const {
    std::vector<const Chart*> v;
    for (const auto& c : charts) v.push_back(&c);
    std::stable_sort(v.begin(), v.end(), [](const Chart* a, const Chart* b) { return a->priority < b->priority; });
    return v;
  }

  /// Chart owning x: the first chart in priority order that contains it.
  const Chart* owner(std::span<const double> x) const {
    for (const Chart* c : by_priority())
      if (c->contains(x)) return c;
    return nullptr;
  }
};

struct PartitionIssue {
  enum class Kind { Gap, Overlap } kind = Kind::Gap;
  PhasePoint point;
  int index_sum = 0;
  std::vector<std::string> charts;  // charts claiming the point
};

struct PartitionReport {
  std::vector<PartitionIssue> issues;
  std::size_t points_checked = 0;
  std::size_t gaps = 0;
  std::size_t overlaps = 0;
  bool ok() const { return issues.empty(); }
};

/// Every lattice point must have index sum exactly one.
inline PartitionReport validate_partition(const Partition& partition) {
  partition.lattice.validate();
  const auto& l = partition.lattice;
  std::vector<std::vector<int>> idx;
  for (const auto& c : partition.charts) idx.push_back(index_function(c, l));
  PartitionReport report;
  report.points_checked = l.size();
  for (std::size_t i = 0; i < l.size(); ++i) {
    int sum = 0;
    for (const auto& v : idx) sum += v[i];
    if (sum == 1) continue;
    PartitionIssue issue;
    issue.kind = sum == 0 ? PartitionIssue::Kind::Gap : PartitionIssue::Kind::Overlap;
    issue.point = l.point(i);
    issue.index_sum = sum;
    for (std::size_t c = 0; c < idx.size(); ++c)
      if (idx[c][i]) issue.charts.push_back(partition.charts[c].label);
    (sum == 0 ? report.gaps : report.overlaps) += 1;
    report.issues.push_back(std::move(issue));
  }
  return report;
}

/// A(phi) I_chart(phi).
inline wigner::PhaseSpaceField restrict(const wigner::PhaseSpaceField& field, const Chart& chart) {
  field.check();
  if (chart.system.dof != 1) throw StructuralError("restrict: phase-space fields are one degree of freedom");
  auto out = field;
  const auto& g = field.grid;
  for (std::size_t k = 0; k < g.n_q; ++k)
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double x[2] = {g.q(k), g.p(j)};
      if (!chart.contains(x)) out.at(k, j) = 0.0;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Involution

namespace detail {

/// Lattice points whose +-margin neighbourhood along every axis lies inside
/// both the lattice and the chart.
inline std::vector<std::size_t> interior_points(const Lattice& l, const Chart& chart, std::size_t margin) {
  const auto inside = index_function(chart, l);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (!inside[i]) continue;
    const auto idx = l.unflatten(i);
    bool ok = true;
    for (std::size_t a = 0; a < l.dims() && ok; ++a) {
      if (idx[a] < margin || idx[a] + margin >= l.n[a]) {
        ok = false;
        break;
      }
      for (std::size_t s = 1; s <= margin && ok; ++s) {
        ok = inside[i + s * l.stride(a)] && inside[i - s * l.stride(a)];
      }
    }
    if (ok) out.push_back(i);
  }
  return out;
}

/// Sum over conjugate planes (q_i, p_i) of the plane bracket, each computed
/// slice by slice with wigner::poisson_bracket.
inline std::vector<double> lattice_poisson(const LatticeField& f, const LatticeField& g, wigner::DiffScheme scheme) {
  const auto& l = f.lattice;
  const std::size_t dof = l.dof();
  std::vector<double> out(l.size(), 0.0);
  for (std::size_t i = 0; i < dof; ++i) {
    const std::size_t qa = i, pa = dof + i;
    const auto grid = wigner::PhaseGrid::make(l.lo[qa], l.hi[qa], l.n[qa], l.lo[pa], l.hi[pa], l.n[pa]);
    // Enumerate slices by fixing the other axes.
    const std::size_t slices = l.size() / (l.n[qa] * l.n[pa]);
    std::vector<std::size_t> bases;
    bases.reserve(slices);
    for (std::size_t flat = 0; flat < l.size(); ++flat) {
      const auto idx = l.unflatten(flat);
      if (idx[qa] == 0 && idx[pa] == 0) bases.push_back(flat);
    }
    std::vector<std::vector<double>> contrib(bases.size());
    parallel_for(bases.size(), [&](std::size_t s) {
      auto a = wigner::PhaseSpaceField::zeros(grid, 1.0, scheme);
      auto b = a;
      for (std::size_t k = 0; k < grid.n_q; ++k)
        for (std::size_t j = 0; j < grid.n_p; ++j) {
          const std::size_t at = bases[s] + k * l.stride(qa) + j * l.stride(pa);
          a.at(k, j) = f.values[at];
          b.at(k, j) = g.values[at];
        }
      const auto br = wigner::poisson_bracket(a, b);
      contrib[s].resize(grid.size());
      for (std::size_t t = 0; t < grid.size(); ++t) contrib[s][t] = br.values[t].real();
    });
    for (std::size_t s = 0; s < bases.size(); ++s)
      for (std::size_t k = 0; k < grid.n_q; ++k)
        for (std::size_t j = 0; j < grid.n_p; ++j)
          out[bases[s] + k * l.stride(qa) + j * l.stride(pa)] += contrib[s][k * grid.n_p + j];
  }
  return out;
}

}  // namespace detail

inline constexpr std::size_t kInteriorMargin = 2;

/// max over chart-interior lattice points and pairs I < J of
/// |{O_I, O_J}_pb| with O_0 = H.
inline double check_involution(const LatticeField& hamiltonian, const std::vector<LatticeField>& constants,
                               const Chart& chart, wigner::DiffScheme scheme = wigner::DiffScheme::FiniteDifference4) {
  hamiltonian.lattice.validate();
  std::vector<const LatticeField*> fields{&hamiltonian};
  for (const auto& c : constants) {
    if (c.values.size() != hamiltonian.values.size()) throw StructuralError("check_involution: lattice mismatch");
    fields.push_back(&c);
  }
  const auto interior = detail::interior_points(hamiltonian.lattice, chart, kInteriorMargin);
  if (interior.empty()) throw PreconditionError("check_involution: chart interior is empty after the margin");
  double worst = 0.0;
  for (std::size_t a = 0; a < fields.size(); ++a)
    for (std::size_t b = a + 1; b < fields.size(); ++b) {
      const auto br = detail::lattice_poisson(*fields[a], *fields[b], scheme);
      for (auto i : interior) worst = std::max(worst, std::abs(br[i]));
    }
  return worst;
}

/// Samples H and the chart's constants on the lattice and checks involution.
inline double check_involution(const Chart& chart, const Lattice& lattice,
                               wigner::DiffScheme scheme = wigner::DiffScheme::FiniteDifference4) {
  const auto& sys = chart.system;
  if (lattice.dof() != sys.dof) throw StructuralError("check_involution: lattice and system dof differ");
  const auto h = LatticeField::sample(lattice, [&](std::span<const double> x) { return sys.energy(x); });
  std::vector<LatticeField> cs;
  for (const auto& c : chart.constants) cs.push_back(LatticeField::sample(lattice, c.value));
  return check_involution(h, cs, chart, scheme);
}

struct MoyalResidual {
  double moyal = 0.0;    // max |{O_I, O_J}_mb|
  double poisson = 0.0;  // max |{O_I, O_J}_pb|
  double gap = 0.0;      // max |{O_I, O_J}_mb - {O_I, O_J}_pb|
};

/// Same as check_involution with the Moyal bracket (one degree of freedom).
inline MoyalResidual moyal_involution_residual(const wigner::PhaseSpaceField& hamiltonian,
                                               const std::vector<wigner::PhaseSpaceField>& constants,
                                               const Chart& chart, double hbar, int order) {
  auto prep = [hbar](wigner::PhaseSpaceField f) {
    f.hbar = hbar;
    return f;
  };
  std::vector<wigner::PhaseSpaceField> fields{prep(hamiltonian)};
  for (const auto& c : constants) fields.push_back(prep(c));
  const auto lattice = Lattice::from_grid(hamiltonian.grid);
  const auto interior = detail::interior_points(lattice, chart, kInteriorMargin);
  if (interior.empty()) throw PreconditionError("moyal_involution_residual: chart interior is empty after the margin");
  MoyalResidual r;
  for (std::size_t a = 0; a < fields.size(); ++a)
    for (std::size_t b = a + 1; b < fields.size(); ++b) {
      const auto mb = wigner::moyal_bracket(fields[a], fields[b], order);
      const auto pb = wigner::poisson_bracket(fields[a], fields[b]);
      for (auto i : interior) {
        r.moyal = std::max(r.moyal, std::abs(mb.values[i]));
        r.poisson = std::max(r.poisson, std::abs(pb.values[i]));
        r.gap = std::max(r.gap, std::abs(mb.values[i] - pb.values[i]));
      }
    }
  return r;
}

}  // namespace sid::charts
