#pragma once

// Separable Hamiltonians H = |p|^2 / 2 + V(q), a catalog of them, named
// constants of motion, and a fixed-step 4th-order symplectic integrator.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sid/common.hpp"

namespace sid::dynamics {

/// Phase point laid out as (q_1..q_N, p_1..p_N).
using PhasePoint = std::vector<double>;

struct System {
  std::string name;
  std::size_t dof = 1;
  std::function<double(std::span<const double>)> potential;
  std::function<void(std::span<const double>, std::span<double>)> potential_gradient;
  double q_period = 0.0;              // 1-dof angle coordinates (pendulum); 0 otherwise
  std::optional<double> separatrix;   // energy of the separatrix, if any
  std::map<std::string, double> parameters;

  double energy(std::span<const double> x) const {
    double kinetic = 0.0;
    for (std::size_t i = 0; i < dof; ++i) kinetic += 0.5 * x[dof + i] * x[dof + i];
    return kinetic + potential(x.subspan(0, dof));
  }

  /// (dH/dq, dH/dp) at x.
  void gradient(std::span<const double> x, std::span<double> out) const {
    potential_gradient(x.subspan(0, dof), out.subspan(0, dof));
    for (std::size_t i = 0; i < dof; ++i) out[dof + i] = x[dof + i];
  }

  double gradient_norm(std::span<const double> x) const {
    std::vector<double> g(2 * dof);
    gradient(x, g);
    double s = 0.0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
  }
};

inline System harmonic(double omega = 1.0) {
  System s;
  s.name = "harmonic";
  s.dof = 1;
  s.parameters = {{"omega", omega}};
  s.potential = [omega](std::span<const double> q) { return 0.5 * omega * omega * q[0] * q[0]; };
  s.potential_gradient = [omega](std::span<const double> q, std::span<double> g) { g[0] = omega * omega * q[0]; };
  return s;
}

/// H = p^2/2 + w0^2 (1 - cos q); separatrix at 2 w0^2.
inline System pendulum(double omega0 = 1.0) {
  System s;
  s.name = "pendulum";
  s.dof = 1;
  s.parameters = {{"omega0", omega0}};
  const double k = omega0 * omega0;
  s.potential = [k](std::span<const double> q) { return k * (1.0 - std::cos(q[0])); };
  s.potential_gradient = [k](std::span<const double> q, std::span<double> g) { g[0] = k * std::sin(q[0]); };
  s.q_period = 2.0 * kPi;
  s.separatrix = 2.0 * k;
  return s;
}

inline System separable_oscillator(double omega1 = 1.0, double omega2 = 1.0) {
  System s;
  s.name = "separable_oscillator";
  s.dof = 2;
  s.parameters = {{"omega1", omega1}, {"omega2", omega2}};
  s.potential = [=](std::span<const double> q) {
    return 0.5 * (omega1 * omega1 * q[0] * q[0] + omega2 * omega2 * q[1] * q[1]);
  };
  s.potential_gradient = [=](std::span<const double> q, std::span<double> g) {
    g[0] = omega1 * omega1 * q[0];
    g[1] = omega2 * omega2 * q[1];
  };
  return s;
}

/// V = (q1^2 + q2^2)/2 + lambda (q1^2 q2 - q2^3 / 3).
inline System henon_heiles(double lambda = 1.0) {
  System s;
  s.name = "henon_heiles";
  s.dof = 2;
  s.parameters = {{"lambda", lambda}};
  s.potential = [lambda](std::span<const double> q) {
    return 0.5 * (q[0] * q[0] + q[1] * q[1]) + lambda * (q[0] * q[0] * q[1] - q[1] * q[1] * q[1] / 3.0);
  };
  s.potential_gradient = [lambda](std::span<const double> q, std::span<double> g) {
    g[0] = q[0] + 2.0 * lambda * q[0] * q[1];
    g[1] = q[1] + lambda * (q[0] * q[0] - q[1] * q[1]);
  };
  s.separatrix = 1.0 / (6.0 * lambda * lambda);  // escape energy
  return s;
}

/// Builds a catalog system from its name and parameters.
inline System make_system(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "harmonic") return harmonic(get("omega", 1.0));
  if (name == "pendulum") return pendulum(get("omega0", 1.0));
  if (name == "separable_oscillator") return separable_oscillator(get("omega1", 1.0), get("omega2", 1.0));
  if (name == "henon_heiles") return henon_heiles(get("lambda", 1.0));
  throw PreconditionError("unknown system '" + name + "'");
}

// Constants of motion drawn from a fixed catalog.

struct Constant {
  std::string name;
  std::function<double(std::span<const double>)> value;
};

inline Constant make_constant(const System& sys, const std::string& form, const std::map<std::string, double>& params) {
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  const std::size_t n = sys.dof;
  if (form == "hamiltonian") {
    return {form, [sys](std::span<const double> x) { return sys.energy(x); }};
  }
  if (form == "oscillator_energy") {
    const auto i = static_cast<std::size_t>(get("dof", 0));
    const double w = get("omega", 1.0);
    if (i >= n) throw PreconditionError("oscillator_energy: dof index out of range");
    return {form, [i, w, n](std::span<const double> x) { return 0.5 * (x[n + i] * x[n + i] + w * w * x[i] * x[i]); }};
  }
  if (form == "momentum") {
    const auto i = static_cast<std::size_t>(get("dof", 0));
    if (i >= n) throw PreconditionError("momentum: dof index out of range");
    return {form, [i, n](std::span<const double> x) { return x[n + i]; }};
  }
  if (form == "angular_momentum") {
    if (n != 2) throw PreconditionError("angular_momentum needs two degrees of freedom");
    return {form, [](std::span<const double> x) { return x[0] * x[3] - x[1] * x[2]; }};
  }
  throw PreconditionError("unknown constant-of-motion form '" + form + "'");
}

// Yoshida's triple-jump composition of the leapfrog.

class Symplectic4 {
 public:
  explicit Symplectic4(const System& sys) : sys_(sys), force_(sys.dof) {}

  void step(PhasePoint& x, double h) {
    static const double cbrt2 = std::cbrt(2.0);
    static const double w1 = 1.0 / (2.0 - cbrt2);
    static const double w0 = -cbrt2 / (2.0 - cbrt2);
    leapfrog(x, w1 * h);
    leapfrog(x, w0 * h);
    leapfrog(x, w1 * h);
  }

 private:
  void leapfrog(PhasePoint& x, double h) {
    const std::size_t n = sys_.dof;
    for (std::size_t i = 0; i < n; ++i) x[i] += 0.5 * h * x[n + i];
    sys_.potential_gradient(std::span<const double>(x.data(), n), force_);
    for (std::size_t i = 0; i < n; ++i) x[n + i] -= h * force_[i];
    for (std::size_t i = 0; i < n; ++i) x[i] += 0.5 * h * x[n + i];
  }

  const System& sys_;
  std::vector<double> force_;
};

}  // namespace sid::dynamics
