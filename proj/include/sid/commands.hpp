#pragma once

// Scenario-driven pipeline stages behind the `sid` subcommands. Each command
// returns a RunReport; files go to the output directory and are listed with
// their SHA-256 digests. Nothing time- or host-dependent is written, so a
// rerun with the same scenario and seed reproduces every byte.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "sid/charts.hpp"
#include "sid/classical.hpp"
#include "sid/io.hpp"
#include "sid/kernels.hpp"
#include "sid/scenario.hpp"
#include "sid/spectral.hpp"
#include "sid/verify.hpp"
#include "sid/wigner.hpp"

namespace sid::commands {

using io::Json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNumerical = 4;

struct Options {
  std::filesystem::path scenario;
  std::filesystem::path out;  // empty: scenario's `output`, relative to the working directory
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  int verbosity = 1;  // 0 quiet, 1 summary, 2 detail
};

inline void log(const Options& o, int level, const std::string& msg) {
  if (o.verbosity >= level) std::cerr << msg << '\n';
}

struct ManifestEntry {
  std::string file;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunReport {
  std::string command;
  std::string scenario;
  std::uint64_t seed = 0;
  Json stages = Json::array();
  Json validation = Json::array();
  Json results = Json::object();
  std::vector<verify::Check> invariants;
  std::vector<std::string> warnings;
  std::vector<ManifestEntry> manifest;
  int exit_code = kExitOk;

  void fail(int code) {
    // The first failure class wins: parse < validation < numerical.
    if (exit_code == kExitOk) exit_code = code;
  }

  Json to_json() const {
    Json inv = Json::array();
    for (const auto& c : invariants) {
      Json j{{"name", c.name}, {"measured", c.measured}, {"relation", c.relation}, {"bound", c.bound}};
      if (c.relation == "in") j["bound_hi"] = c.bound_hi;
      j["pass"] = c.pass;
      inv.push_back(j);
    }
    Json man = Json::array();
    for (const auto& m : manifest) man.push_back({{"file", m.file}, {"bytes", m.bytes}, {"sha256", m.sha256}});
    return {{"command", command}, {"scenario", scenario},     {"seed", seed},
            {"exit_code", exit_code}, {"stages", stages},     {"validation", validation},
            {"results", results},  {"invariants", inv},       {"warnings", warnings},
            {"manifest", man}};
  }
};

/// Writes files under one directory and records them in the manifest.
class Output {
 public:
  Output(std::filesystem::path dir, RunReport& report) : dir_(std::move(dir)), report_(report) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& bytes) {
    io::write_file(dir_ / name, bytes);
    report_.manifest.push_back({name, bytes.size(), io::sha256(bytes)});
  }

  /// report.json itself is not listed in its own manifest.
  void finish() { io::write_file(dir_ / "report.json", report_.to_json().dump(2) + "\n"); }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  RunReport& report_;
};

/// Runs one stage, converting library exceptions into a failed stage.
inline bool stage(RunReport& r, const Options& o, const std::string& name, const std::function<void(Json&)>& body) {
  Json entry{{"name", name}, {"status", "ok"}};
  Json detail = Json::object();
  const auto failed_before = r.exit_code;
  try {
    body(detail);
    if (r.exit_code != failed_before) entry["status"] = "failed";
  } catch (const scenario::ScenarioError& e) {
    entry["status"] = "failed";
    entry["error"] = e.what();
    r.fail(kExitParse);
  } catch (const StructuralError& e) {
    entry["status"] = "failed";
    entry["error"] = std::string("structural: ") + e.what();
    r.fail(kExitValidation);
  } catch (const PreconditionError& e) {
    entry["status"] = "failed";
    entry["error"] = std::string("precondition: ") + e.what();
    r.fail(kExitNumerical);
  } catch (const NumericalError& e) {
    entry["status"] = "failed";
    entry["error"] = std::string("numerical: ") + e.what();
    r.fail(kExitNumerical);
  } catch (const io::FormatError& e) {
    entry["status"] = "failed";
    entry["error"] = std::string("format: ") + e.what();
    r.fail(kExitParse);
  } catch (const std::exception& e) {
    entry["status"] = "failed";
    entry["error"] = e.what();
    r.fail(kExitNumerical);
  }
  if (!detail.empty()) entry["detail"] = detail;
  log(o, 1, "[" + entry["status"].get<std::string>() + "] " + name +
                (entry.contains("error") ? ": " + entry["error"].get<std::string>() : std::string()));
  const bool ok = entry["status"] == "ok";
  r.stages.push_back(std::move(entry));
  return ok;
}

inline void skip(RunReport& r, const Options& o, const std::string& name, const std::string& why) {
  r.stages.push_back({{"name", name}, {"status", "skipped"}, {"reason", why}});
  log(o, 1, "[skipped] " + name + ": " + why);
}

inline void add_check(RunReport& r, verify::Check c) {
  if (!c.pass) r.fail(kExitValidation);
  r.invariants.push_back(std::move(c));
}

// ---------------------------------------------------------------------------
// Scenario objects

inline spectral::SpectralKernel load_kernel_file(const std::filesystem::path& p) {
  return io::state_from(io::deserialize(io::read_file(p))).kernel;
}

inline spectral::VanHoveState build_state(const scenario::Scenario& s) {
  if (!s.energy_grid) throw PreconditionError("scenario has no energy_grid");
  auto k = scenario::build_kernel(s.state_singular, *s.energy_grid, s.channels, load_kernel_file);
  k = kernels::combine(std::move(k), scenario::build_kernel(s.state_regular, *s.energy_grid, s.channels, load_kernel_file));
  if (s.state_scale != 1.0) {
    for (auto& z : k.singular) z *= s.state_scale;
    for (auto& z : k.regular) z *= s.state_scale;
  }
  return {k, s.hbar};
}

/// Defaults to the energy H when no observable is declared.
inline spectral::VanHoveObservable build_observable(const scenario::Scenario& s) {
  if (s.observable_singular.empty() && s.observable_regular.empty())
    return {kernels::energy_singular(*s.energy_grid, s.channels)};
  auto k = scenario::build_kernel(s.observable_singular, *s.energy_grid, s.channels, load_kernel_file);
  return {kernels::combine(std::move(k),
                           scenario::build_kernel(s.observable_regular, *s.energy_grid, s.channels, load_kernel_file))};
}

inline Json violations_json(const spectral::ValidationReport& rep) {
  Json out = Json::array();
  for (const auto& v : rep.violations)
    out.push_back({{"constraint", v.constraint}, {"location", v.location}, {"magnitude", v.magnitude}});
  return out;
}

inline std::string describe(const std::string& constraint) {
  if (constraint == "normalization") return "normalization (trace of the state must equal 1)";
  if (constraint == "hermiticity") return "hermiticity (kernel must equal its adjoint)";
  if (constraint == "positivity") return "positivity (singular blocks must be positive semidefinite)";
  return constraint;
}

inline bool record_state_validation(RunReport& r, const Options& o, const std::string& name,
                                    const spectral::VanHoveState& st) {
  const auto rep = spectral::validate_state(st);
  Json v{{"check", name}, {"ok", rep.ok()}, {"trace", spectral::trace(st.kernel)}, {"violations", violations_json(rep)}};
  for (const auto& viol : rep.violations) {
    const std::string msg = name + " failed: " + describe(viol.constraint) + " at " + viol.location +
                            ", magnitude " + io::number(viol.magnitude);
    log(o, 1, msg);
  }
  r.validation.push_back(v);
  if (!rep.ok()) r.fail(kExitValidation);
  return rep.ok();
}

inline constexpr std::size_t kMaxListedIssues = 50;

inline bool record_partition(RunReport& r, const Options& o, const scenario::Scenario& s) {
  const charts::Partition part{s.charts, s.chart_lattice()};
  const auto rep = charts::validate_partition(part);
  Json issues = Json::array();
  for (std::size_t i = 0; i < rep.issues.size() && i < kMaxListedIssues; ++i) {
    const auto& is = rep.issues[i];
    issues.push_back({{"kind", is.kind == charts::PartitionIssue::Kind::Gap ? "gap" : "overlap"},
                      {"point", is.point},
                      {"index_sum", is.index_sum},
                      {"charts", is.charts}});
  }
  r.validation.push_back({{"check", "partition"},
                          {"ok", rep.ok()},
                          {"points_checked", rep.points_checked},
                          {"gaps", rep.gaps},
                          {"overlaps", rep.overlaps},
                          {"issues_listed", issues.size()},
                          {"issues", issues}});
  if (!rep.ok()) {
    std::string first;
    const auto& is = rep.issues.front();
    for (std::size_t k = 0; k < is.point.size(); ++k) first += (k ? ", " : "") + io::number(is.point[k]);
    log(o, 1, "partition failed: " + std::to_string(rep.gaps) + " gaps, " + std::to_string(rep.overlaps) +
                  " overlaps; first at (" + first + ")");
    r.fail(kExitValidation);
  }
  return rep.ok();
}

inline bool record_involution(RunReport& r, const Options& o, const scenario::Scenario& s) {
  bool all = true;
  const auto lattice = s.chart_lattice();
  for (const auto& c : s.charts) {
    const double res = charts::check_involution(c, lattice, s.involution_scheme);
    const bool ok = res <= s.involution_tolerance;
    r.validation.push_back({{"check", "involution"},
                            {"chart", c.label},
                            {"ok", ok},
                            {"residual", res},
                            {"tolerance", s.involution_tolerance},
                            {"differentiation", wigner::to_string(s.involution_scheme)}});
    if (!ok) {
      log(o, 1, "involution failed on chart '" + c.label + "': residual " + io::number(res));
      r.fail(kExitValidation);
      all = false;
    }
  }
  return all;
}

inline std::filesystem::path output_dir(const scenario::Scenario& s, const Options& o) {
  return o.out.empty() ? std::filesystem::path(s.output) : o.out;
}

/// Loads the scenario or returns a report carrying the parse failure.
inline std::optional<scenario::Scenario> load(RunReport& r, const Options& o) {
  r.scenario = o.scenario.string();
  try {
    auto s = scenario::load(o.scenario);
    r.seed = o.seed.value_or(s.seed);
    s.seed = r.seed;
    set_worker_count(o.threads);
    return s;
  } catch (const scenario::ScenarioError& e) {
    r.stages.push_back({{"name", "parse"}, {"status", "failed"}, {"error", e.what()}, {"line", e.line()},
                        {"field", e.field()}});
    log(o, 0, std::string("parse error: ") + e.what());
    r.fail(kExitParse);
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// validate

inline RunReport cmd_validate(const Options& o) {
  RunReport r;
  r.command = "validate";
  auto s = load(r, o);
  if (!s) return r;
  if (s->energy_grid && (!s->state_singular.empty() || !s->state_regular.empty())) {
    stage(r, o, "state", [&](Json& d) {
      const auto st = build_state(*s);
      d["trace"] = spectral::trace(st.kernel);
      record_state_validation(r, o, "state", st);
      build_observable(*s).kernel.check_shape();
    });
  } else {
    skip(r, o, "state", "no state declared");
  }
  if (!s->charts.empty()) {
    stage(r, o, "partition", [&](Json&) { record_partition(r, o, *s); });
    stage(r, o, "involution", [&](Json&) { record_involution(r, o, *s); });
  } else {
    skip(r, o, "partition", "no charts declared");
  }
  Output out(output_dir(*s, o), r);
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// decohere

struct DecohereProducts {
  spectral::VanHoveState decohered;
  spectral::PointerBasisResult basis;
};

inline Json decay_fit(const spectral::DecayCurve& c, double hbar) {
  Json fit = Json::object();
  if (c.rows.empty()) return fit;
  const double r0 = std::abs(c.rows.front().regular);
  if (r0 == 0.0) {
    fit["law"] = "none (regular part is zero; the curve is flat)";
    return fit;
  }
  std::vector<double> t2, lr, lt, lp;
  for (const auto& row : c.rows) {
    const double m = std::abs(row.regular);
    if (m <= 1e-12 * r0 || row.t > c.validity_limit) continue;
    t2.push_back(row.t * row.t);
    lr.push_back(std::log(m / r0));
    if (row.t >= c.validity_limit / 10.0 && row.t > 0.0) {
      lt.push_back(std::log(row.t));
      lp.push_back(std::log(m));
    }
  }
  if (t2.size() >= 3) {
    const auto g = fit_line(t2, lr);
    fit["gaussian"] = {{"sigma", g.slope < 0 ? hbar * std::sqrt(-2.0 * g.slope) : 0.0}, {"r_squared", g.r_squared}};
  }
  if (lt.size() >= 3) {
    const auto p = fit_line(lt, lp);
    fit["power_law"] = {{"slope", p.slope}, {"r_squared", p.r_squared}};
  }
  return fit;
}

inline std::optional<DecohereProducts> run_decohere(RunReport& r, const Options& o, const scenario::Scenario& s,
                                                    Output* out) {
  std::optional<DecohereProducts> products;
  stage(r, o, "decohere", [&](Json& d) {
    const auto st = build_state(s);
    if (!record_state_validation(r, o, "state", st)) throw PreconditionError("state fails validation");
    const auto obs = build_observable(s);
    if (s.time_grid) {
      const auto curve = spectral::decay_curve(st, obs, s.time_grid->values());
      if (curve.beyond_validity) {
        r.warnings.push_back("time grid exceeds the quadrature validity limit t_max = " + io::number(curve.validity_limit));
        log(o, 1, "warning: " + r.warnings.back());
      }
      d["singular"] = curve.singular;
      d["validity_limit"] = curve.validity_limit;
      d["fit"] = decay_fit(curve, s.hbar);
      // Single Gaussian-in-nu kernel: compare the curve shape with exp(-sigma^2 t^2 / 2 hbar^2).
      if (s.state_regular.size() == 1 && s.state_regular[0].generator == "gaussian_nu" && !curve.rows.empty()) {
        const double sigma = s.state_regular[0].params.at("sigma");
        const double r0 = curve.rows.front().regular.real();
        double worst = 0.0;
        for (const auto& row : curve.rows) {
          const double ref = r0 * std::exp(-sigma * sigma * row.t * row.t / (2.0 * s.hbar * s.hbar));
          worst = std::max(worst, std::abs(row.regular - ref) / std::abs(ref));
        }
        add_check(r, verify::below("decay curve vs exp(-sigma^2 t^2/2 hbar^2), max relative deviation", worst, 1e-3));
      }
      if (out) out->write("decay.csv", io::decay_csv(curve));
    } else {
      skip(r, o, "decay_curve", "no time_grid declared");
    }
    const auto weak = spectral::weak_limit(st);
    const auto basis = spectral::pointer_basis(weak);
    const auto dec = spectral::apply_pointer_basis(weak, basis);
    d["pointer_basis"] = {{"max_reconstruction_error", basis.max_reconstruction_error},
                          {"max_unitarity_error", basis.max_unitarity_error},
                          {"max_offdiagonal_after", spectral::max_offdiagonal(dec.kernel)}};
    if (out) {
      out->write("decohered.sidc", io::serialize(io::to_container(dec)));
      out->write("pointer_basis.sidc", io::serialize(io::to_container(basis, dec.kernel.grid)));
    }
    products = DecohereProducts{dec, basis};
  });
  return products;
}

inline RunReport cmd_decohere(const Options& o) {
  RunReport r;
  r.command = "decohere";
  auto s = load(r, o);
  if (!s) return r;
  Output out(output_dir(*s, o), r);
  if (!s->energy_grid || (s->state_singular.empty() && s->state_regular.empty())) {
    skip(r, o, "decohere", "no state declared");
    r.fail(kExitValidation);
  } else {
    run_decohere(r, o, *s, &out);
  }
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// wigner

namespace detail {

inline std::vector<Complex> coherent(double q_min, double q_max, std::size_t n, double hbar, double q0, double p0,
                                     double width) {
  std::vector<Complex> psi(n);
  const double h = (q_max - q_min) / static_cast<double>(n - 1);
  const double norm = std::pow(kPi * hbar * width * width, -0.25);
  for (std::size_t a = 0; a < n; ++a) {
    const double x = q_min + static_cast<double>(a) * h;
    psi[a] = norm * std::exp(-(x - q0) * (x - q0) / (2.0 * hbar * width * width)) * std::polar(1.0, p0 * x / hbar);
  }
  return psi;
}

inline std::function<double(double, double)> named_symbol(const std::string& name, const dynamics::System& sys) {
  if (name == "q") return [](double q, double) { return q; };
  if (name == "p") return [](double, double p) { return p; };
  if (name == "q2") return [](double q, double) { return q * q; };
  if (name == "p2") return [](double, double p) { return p * p; };
  if (name == "qp") return [](double q, double p) { return q * p; };
  if (name == "gauss") return [](double q, double p) { return std::exp(-(q * q + p * p) / 2.0); };
  if (name == "sinq") return [](double q, double) { return std::sin(q); };
  if (name == "cosp") return [](double, double p) { return std::cos(p); };
  if (name == "H")
    return [sys](double q, double p) {
      const double x[2] = {q, p};
      return sys.energy(x);
    };
  throw PreconditionError("unknown symbol '" + name + "'");
}

}  // namespace detail

inline RunReport cmd_wigner(const Options& o) {
  RunReport r;
  r.command = "wigner";
  auto s = load(r, o);
  if (!s) return r;
  Output out(output_dir(*s, o), r);
  if (!s->wigner) {
    skip(r, o, "wigner", "no wigner block declared");
    r.fail(kExitValidation);
    out.finish();
    return r;
  }
  const auto& w = *s->wigner;
  const double hb = s->hbar;
  for (std::size_t i = 0; i < w.operators.size(); ++i) {
    const auto& op = w.operators[i];
    const std::string tag = std::to_string(i) + "_" + op.name;
    stage(r, o, "symbol " + tag, [&](Json& d) {
      auto p = [&](const char* key, double fallback) {
        auto it = op.params.find(key);
        return it == op.params.end() ? fallback : it->second;
      };
      wigner::PhaseSpaceField field;
      if (op.name == "identity") {
        field = wigner::wigner_transform(wigner::OperatorKernel::identity(w.q_min, w.q_max, w.n), hb);
        double dev = 0.0;
        for (const auto& z : field.values) dev = std::max(dev, std::abs(z - 1.0));
        add_check(r, verify::below("identity symbol, max |W - 1|", dev, 1e-10));
      } else if (op.name == "position") {
        auto k = wigner::OperatorKernel::zeros(w.q_min, w.q_max, w.n);
        for (std::size_t a = 0; a < w.n; ++a) k.at(a, a) = k.x(a) / k.h();
        field = wigner::wigner_transform(k, hb);
        double dev = 0.0;
        for (std::size_t a = 0; a < field.grid.n_q; ++a)
          for (std::size_t j = 0; j < field.grid.n_p; ++j) dev = std::max(dev, std::abs(field.at(a, j) - field.grid.q(a)));
        add_check(r, verify::below("position symbol, max |W - q|", dev, 1e-10));
      } else {
        std::vector<Complex> psi;
        const double width = p("width", 1.0);
        if (op.name == "ground_state" || op.name == "coherent") {
          psi = detail::coherent(w.q_min, w.q_max, w.n, hb, p("q0", 0.0), p("p0", 0.0), width);
        } else {  // cat: even superposition of two coherent states
          const double sep = p("separation", 4.0);
          const auto a = detail::coherent(w.q_min, w.q_max, w.n, hb, p("q0", 0.0) - sep / 2, p("p0", 0.0), width);
          const auto b = detail::coherent(w.q_min, w.q_max, w.n, hb, p("q0", 0.0) + sep / 2, p("p0", 0.0), width);
          psi.resize(w.n);
          double norm = 0.0;
          const double h = (w.q_max - w.q_min) / static_cast<double>(w.n - 1);
          for (std::size_t k = 0; k < w.n; ++k) {
            psi[k] = a[k] + b[k];
            norm += std::norm(psi[k]) * h;
          }
          for (auto& z : psi) z /= std::sqrt(norm);
        }
        const auto rho = wigner::OperatorKernel::projector(w.q_min, w.q_max, psi);
        field = wigner::to_state_symbol(wigner::wigner_transform(rho, hb));
        double peak = 0.0, lowest = 0.0;
        for (const auto& z : field.values) {
          peak = std::max(peak, z.real());
          lowest = std::min(lowest, z.real());
        }
        d["peak"] = peak;
        d["minimum"] = lowest;
        d["normalization"] = wigner::pairing(field, wigner::PhaseSpaceField::sample(field.grid, hb, [](double, double) { return 1.0; }));
        if (op.name == "ground_state" && width == 1.0) {
          double dev = 0.0;
          for (std::size_t a = 0; a < field.grid.n_q; ++a)
            for (std::size_t j = 0; j < field.grid.n_p; ++j) {
              const double q = field.grid.q(a) - p("q0", 0.0), pp = field.grid.p(j) - p("p0", 0.0);
              dev = std::max(dev, std::abs(field.at(a, j) - std::exp(-(q * q + pp * pp) / hb) / (kPi * hb)));
            }
          add_check(r, verify::below("ground-state field vs exp(-(q^2+p^2)/hbar)/(pi hbar), max abs", dev, 1e-6));
          add_check(r, verify::below("ground-state peak vs 1/(pi hbar), absolute", std::abs(peak - 1.0 / (kPi * hb)), 1e-6));
        }
      }
      field.scheme = w.scheme;
      d["max_imag"] = field.max_imag();
      out.write("wigner_" + tag + ".csv", io::field_csv(field));
      out.write("wigner_" + tag + ".sidc", io::serialize(io::to_container(field)));
    });
  }
  const auto sys = s->system();
  const auto grid = wigner::PhaseGrid::dual(w.q_min, w.q_max, w.n, hb);
  for (std::size_t i = 0; i < w.brackets.size(); ++i) {
    const auto& b = w.brackets[i];
    const std::string tag = std::to_string(i) + "_" + b.kind + "_" + b.f + "_" + b.g;
    stage(r, o, "bracket " + tag, [&](Json& d) {
      const auto f = wigner::PhaseSpaceField::sample(grid, hb, detail::named_symbol(b.f, sys), w.scheme);
      const auto g = wigner::PhaseSpaceField::sample(grid, hb, detail::named_symbol(b.g, sys), w.scheme);
      wigner::PhaseSpaceField res;
      if (b.kind == "star") res = wigner::star_product(f, g, b.order);
      else if (b.kind == "moyal") res = wigner::moyal_bracket(f, g, b.order);
      else res = wigner::poisson_bracket(f, g);
      d["max_abs"] = res.max_abs();
      d["order"] = b.order;
      d["differentiation"] = wigner::to_string(w.scheme);
      if (b.kind != "star" && b.f == "q" && b.g == "p") {
        double dev = 0.0;
        for (const auto& z : res.values) dev = std::max(dev, std::abs(z - 1.0));
        add_check(r, verify::below("{q,p}_" + b.kind + ", max |value - 1|", dev, 1e-10));
      }
      out.write("bracket_" + tag + ".csv", io::field_csv(res));
      out.write("bracket_" + tag + ".sidc", io::serialize(io::to_container(res)));
    });
  }
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// classical

inline RunReport cmd_classical(const Options& o) {
  RunReport r;
  r.command = "classical";
  auto s = load(r, o);
  if (!s) return r;
  Output out(output_dir(*s, o), r);
  if (!s->classical || s->charts.empty()) {
    skip(r, o, "classical", "needs charts and a classical block");
    r.fail(kExitValidation);
    out.finish();
    return r;
  }
  const auto& cl = *s->classical;
  const auto sys = s->system();
  const classical::OrbitOptions orbit_opt{cl.step, cl.max_time};
  std::vector<classical::ActionAngleChart> aa;
  std::vector<std::pair<std::size_t, std::size_t>> level_slot(cl.levels.size());  // (chart, orbit) per level spec
  std::optional<classical::ClassicalDensity> density;
  double duality_spectral = 0.0;

  if (!record_partition(r, o, *s)) log(o, 1, "continuing with an invalid partition");

  if (cl.source == "state") {
    stage(r, o, "classical_density", [&](Json& d) {
      if (!s->phase_grid) throw PreconditionError("the classical density needs a phase_grid");
      auto dec = run_decohere(r, o, *s, &out);
      if (!dec) throw PreconditionError("decoherence stage failed");
      classical::LevelMap map;
      for (const auto& label : cl.channel_charts) map.channel_chart.push_back(s->chart_index(label));
      auto res = classical::decohered_to_classical(dec->decohered, map, s->charts, *s->phase_grid, cl.smearing, orbit_opt);
      aa = std::move(res.charts);
      density = std::move(res.density);
      const spectral::VanHoveObservable energy{kernels::energy_singular(dec->decohered.kernel.grid, s->channels)};
      duality_spectral = classical::spectral_pairing(dec->decohered, energy);
      d["levels"] = density->weights.size();
    });
  } else if (cl.levels.empty()) {
    skip(r, o, "classical_density", "empty level list");
  } else {
    stage(r, o, "classical_density", [&](Json& d) {
      if (!s->phase_grid) throw PreconditionError("the classical density needs a phase_grid");
      std::vector<std::vector<classical::Level>> per_chart(s->charts.size());
      for (std::size_t i = 0; i < cl.levels.size(); ++i) {
        const auto c = s->chart_index(cl.levels[i].chart);
        level_slot[i] = {c, per_chart[c].size()};
        per_chart[c].push_back({cl.levels[i].energy, 0.0});
      }
      for (std::size_t c = 0; c < s->charts.size(); ++c)
        aa.push_back(classical::build_action_angle(s->charts[c], per_chart[c], orbit_opt));
      Json unreachable = Json::array();
      std::vector<classical::LevelWeight> weights;
      double total = 0.0;
      for (std::size_t i = 0; i < cl.levels.size(); ++i) {
        const auto [c, k] = level_slot[i];
        const auto& rec = aa[c].orbits[k];
        if (!rec.reachable) {
          unreachable.push_back({{"level", i}, {"chart", cl.levels[i].chart}, {"energy", cl.levels[i].energy}, {"reason", rec.reason}});
          r.warnings.push_back("level " + std::to_string(i) + " unreachable: " + rec.reason);
          continue;
        }
        if (cl.levels[i].weight > 0.0) {
          weights.push_back({c, k, cl.levels[i].weight});
          total += cl.levels[i].weight;
        }
      }
      d["unreachable"] = unreachable;
      Json table = Json::array();
      for (std::size_t i = 0; i < cl.levels.size(); ++i) {
        const auto& rec = aa[level_slot[i].first].orbits[level_slot[i].second];
        if (!rec.reachable) continue;
        table.push_back({{"level", i}, {"chart", cl.levels[i].chart}, {"energy", rec.level.energy},
                         {"period", rec.period}, {"action", rec.action}, {"frequency", rec.frequency},
                         {"volume", rec.volume}, {"closure_error", rec.closure_error}});
      }
      d["orbits"] = table;
      if (weights.empty()) {
        skip(r, o, "density_field", "no weighted reachable levels");
        return;
      }
      if (std::abs(total - 1.0) > classical::kWeightSumTolerance) {
        r.warnings.push_back("level weights renormalized from " + io::number(total) + " to 1");
        for (auto& w : weights) w.mass /= total;
      }
      density = classical::classical_density(weights, aa, *s->phase_grid, cl.smearing);
      for (const auto& w : weights) duality_spectral += w.mass * aa[w.chart].orbits[w.level].level.energy;
      d["levels"] = weights.size();
    });
  }

  if (density) {
    stage(r, o, "density_checks", [&](Json& d) {
      d["smearing"] = density->smearing;
      d["integral"] = density->integral;
      d["min_value"] = density->min_value;
      add_check(r, verify::at_least("density minimum", density->min_value, classical::kNonnegativityFloor));
      add_check(r, verify::below("|integral - 1|", std::abs(density->integral - 1.0), 1e-3));
      const double phase = classical::phase_pairing(*density, sys, [](double e) { return e; });
      const double rel = std::abs(phase - duality_spectral) / std::max(std::abs(duality_spectral), 1e-300);
      d["duality"] = {{"observable", "H"}, {"spectral", duality_spectral}, {"phase_space", phase}};
      add_check(r, verify::below("duality with O = H, relative", rel, 1e-3));
      if (density->weights.size() == 1) {
        const auto& w = density->weights.front();
        add_check(r, verify::below("single-level angular non-uniformity",
                                   classical::angular_nonuniformity(*density, aa[w.chart], w.level), 1e-3));
      }
      try {
        const double drift = classical::density_flow_invariance(*density, sys, cl.flow_probe, {cl.step, 4, 1e-3});
        add_check(r, verify::below("flow invariance drift at t = " + io::number(cl.flow_probe), drift, 1e-2));
      } catch (const PreconditionError& e) {
        r.warnings.push_back(std::string("flow invariance not measured: ") + e.what());
      }
      out.write("density.csv", io::field_csv(density->field));
      out.write("density.sidc", io::serialize(io::to_container(density->field)));
      if (s->charts.size() > 1) {
        Json parts = Json::array();
        for (const auto& c : s->charts) {
          const auto part = charts::restrict(density->field, c);
          parts.push_back({{"chart", c.label},
                           {"mass", wigner::pairing(part, wigner::PhaseSpaceField::sample(part.grid, 1.0, [](double, double) { return 1.0; }))}});
          out.write("density_" + c.label + ".csv", io::field_csv(part));
        }
        d["per_chart"] = parts;
      }
    });
  }

  if (cl.trajectories.empty()) {
    skip(r, o, "trajectories", "none requested");
  }
  for (std::size_t i = 0; i < cl.trajectories.size(); ++i) {
    const auto& t = cl.trajectories[i];
    stage(r, o, "trajectory " + std::to_string(i), [&](Json& d) {
      classical::Trajectory tr;
      if (!t.initial.empty()) {
        const charts::Chart* chart = t.chart.empty() ? nullptr : &s->charts[s->chart_index(t.chart)];
        tr = classical::integrate_trajectory(sys, t.initial, t.duration, t.step,
                                             chart ? chart->constants : std::vector<dynamics::Constant>{}, chart);
      } else {
        if (aa.empty() || cl.source != "levels") throw PreconditionError("level trajectories need the level list");
        const auto [c, k] = level_slot[*t.level];
        tr = classical::sample_trajectory(aa[c], k, t.tau0, {}, t.duration, t.step);
        if (tr.times.size() > 1) {
          const auto [tt, th] = verify::angle_series(
              classical::ActionAngleChart{aa[c].chart, aa[c].step, {aa[c].orbits[k]}, true}, tr, 10);
          const auto fit = fit_line(tt, th);
          const double rate = aa[c].orbits[k].angular_rate();
          d["angle_rate"] = {{"fitted", fit.slope}, {"expected", rate}, {"r_squared", fit.r_squared}};
          add_check(r, verify::below("trajectory " + std::to_string(i) + " angle rate vs 2 pi / T, relative",
                                     std::abs(fit.slope / rate - 1.0), 1e-4));
        }
      }
      d["energy_drift"] = tr.energy_drift;
      d["exited_chart"] = tr.exited_chart;
      if (tr.exited_chart) r.warnings.push_back("trajectory " + std::to_string(i) + " left its chart");
      add_check(r, verify::below("trajectory " + std::to_string(i) + " energy drift, relative to max(1, |H0|)",
                                 tr.energy_drift / std::max(1.0, std::abs(tr.energy.front())),
                                 classical::kEnergyDriftTolerance));
      out.write("trajectory_" + std::to_string(i) + ".csv", io::trajectory_csv(tr));
    });
  }
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// verify

inline RunReport cmd_verify(const Options& o) {
  RunReport r;
  r.command = "verify";
  r.seed = o.seed.value_or(verify::kDefaultSeed);
  set_worker_count(o.threads);
  const auto suites = verify::run_all(r.seed);
  for (const auto& s : suites) {
    r.stages.push_back({{"name", s.name}, {"status", s.pass() ? "ok" : "failed"}});
    for (const auto& c : s.checks) {
      char line[256];
      std::snprintf(line, sizeof line, "%s  %-16s %s: %.6g %s %.6g%s", c.pass ? "PASS" : "FAIL", s.name.c_str(),
                    c.name.c_str(), c.measured, c.relation.c_str(), c.bound,
                    c.relation == "in" ? (std::string(" .. ") + io::number(c.bound_hi)).c_str() : "");
      if (o.verbosity >= 1) std::cout << line << '\n';
      add_check(r, c);
    }
  }
  Output out(o.out.empty() ? std::filesystem::path("verify-out") : o.out, r);
  out.finish();
  return r;
}

}  // namespace sid::commands
