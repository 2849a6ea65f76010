#pragma once

// Scenario files: one YAML document describing a system, its spectral state,
// phase grids, charts and classical levels.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "sid/charts.hpp"
#include "sid/classical.hpp"
#include "sid/dynamics.hpp"
#include "sid/kernels.hpp"
#include "sid/spectral.hpp"
#include "sid/wigner.hpp"

namespace sid::scenario {

/// Parse or range error, located by line and dotted field path.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& file, int line, const std::string& field, const std::string& what)
      : std::runtime_error(file + ":" + (line > 0 ? std::to_string(line) : std::string("?")) + ": " + field + ": " + what),
        line_(line),
        field_(field) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

struct KernelSpec {
  std::string generator;  // thermal | flat | gaussian_nu | c1_compact | energy | identity | flat_regular | file
  std::map<std::string, double> params;
  std::optional<kernels::SmoothWindow> window;
  std::filesystem::path path;
};

struct TimeGrid {
  double start = 0.0, stop = 1.0;
  std::size_t points = 2;
  std::vector<double> values() const {
    std::vector<double> t(points);
    for (std::size_t i = 0; i < points; ++i)
      t[i] = points == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(points - 1);
    return t;
  }
};

struct OperatorSpec {
  std::string name;  // identity | position | ground_state | coherent | cat
  std::map<std::string, double> params;
};

struct BracketSpec {
  std::string f, g;
  std::string kind;  // star | moyal | poisson
  int order = 2;
};

struct WignerSpec {
  double q_min = -8.0, q_max = 8.0;
  std::size_t n = 128;
  wigner::DiffScheme scheme = wigner::DiffScheme::Spectral;
  int star_order = 2;
  std::vector<OperatorSpec> operators;
  std::vector<BracketSpec> brackets;
};

struct LevelSpec {
  std::string chart;
  double energy = 0.0;
  double weight = 0.0;
};

struct TrajectorySpec {
  std::string chart;            // action-angle start on a level of this chart
  std::optional<std::size_t> level;  // index into the classical level list
  std::vector<double> initial;  // or an explicit phase point
  double tau0 = 0.0;
  double duration = 1.0;
  double step = 1e-3;
};

struct ClassicalSpec {
  std::string source = "levels";  // levels | state
  std::vector<LevelSpec> levels;
  std::vector<std::string> channel_charts;
  double smearing = 0.0;  // 0: four resolution units
  double step = 1e-3;
  double max_time = 1e3;
  std::vector<TrajectorySpec> trajectories;
  double flow_probe = 1.0;
};

struct Scenario {
  std::filesystem::path file;
  std::string system_name;
  std::map<std::string, double> system_params;
  double hbar = 1.0;
  std::uint64_t seed = 0;
  std::string output = "out";

  std::optional<spectral::EnergyGrid> energy_grid;
  std::size_t channels = 1;
  std::vector<KernelSpec> state_singular, state_regular;
  double state_scale = 1.0;
  std::vector<KernelSpec> observable_singular, observable_regular;
  std::optional<TimeGrid> time_grid;

  std::optional<wigner::PhaseGrid> phase_grid;
  std::optional<charts::Lattice> lattice;  // several degrees of freedom
  std::optional<WignerSpec> wigner;

  std::vector<charts::Chart> charts;
  double involution_tolerance = 1e-6;
  wigner::DiffScheme involution_scheme = wigner::DiffScheme::FiniteDifference4;

  std::optional<ClassicalSpec> classical;

  dynamics::System system() const { return dynamics::make_system(system_name, system_params); }

  charts::Lattice chart_lattice() const {
    if (lattice) return *lattice;
    if (phase_grid) return charts::Lattice::from_grid(*phase_grid);
    throw PreconditionError("scenario has neither phase_grid nor lattice");
  }

  std::size_t chart_index(const std::string& label) const {
    for (std::size_t i = 0; i < charts.size(); ++i)
      if (charts[i].label == label) return i;
    throw PreconditionError("unknown chart '" + label + "'");
  }
};

// ---------------------------------------------------------------------------

namespace detail {

class Reader {
 public:
  Reader(std::string file, YAML::Node node, std::string path, int line)
      : file_(std::move(file)), node_(std::move(node)), path_(std::move(path)), line_(line) {
    if (node_.IsDefined() && !node_.IsNull() && node_.Mark().line >= 0) line_ = node_.Mark().line + 1;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ScenarioError(file_, line_, path_.empty() ? "<root>" : path_, what); }

  bool has(const std::string& key) const { return node_.IsMap() && node_[key].IsDefined() && !node_[key].IsNull(); }

  Reader operator[](const std::string& key) const {
    if (!node_.IsMap()) fail("expected a mapping");
    return {file_, node_[key], path_.empty() ? key : path_ + "." + key, line_};
  }

  Reader at(std::size_t i) const { return {file_, node_[i], path_ + "[" + std::to_string(i) + "]", line_}; }

  Reader require(const std::string& key) const {
    if (!has(key)) fail("missing required field '" + key + "'");
    return (*this)[key];
  }

  std::size_t size() const {
    if (!node_.IsSequence()) fail("expected a list");
    return node_.size();
  }

  bool is_sequence() const { return node_.IsSequence(); }

  template <class T>
  T as() const {
    try {
      return node_.as<T>();
    } catch (const YAML::Exception&) {
      fail("cannot read value '" + (node_.IsScalar() ? node_.Scalar() : std::string("<structure>")) + "'");
    }
  }

  double number(std::optional<double> lo = {}, std::optional<double> hi = {}) const {
    const double v = as<double>();
    if (!std::isfinite(v)) fail("value must be finite");
    if (lo && v < *lo) fail("value " + std::to_string(v) + " is below the allowed minimum " + std::to_string(*lo));
    if (hi && v > *hi) fail("value " + std::to_string(v) + " is above the allowed maximum " + std::to_string(*hi));
    return v;
  }

  std::size_t count(std::size_t lo = 0, std::size_t hi = std::numeric_limits<std::size_t>::max()) const {
    const auto v = as<long long>();
    if (v < static_cast<long long>(lo) || static_cast<unsigned long long>(v) > hi)
      fail("count " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<std::size_t>(v);
  }

  std::string text(const std::set<std::string>& allowed = {}) const {
    const auto v = as<std::string>();
    if (!allowed.empty() && !allowed.count(v)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail("'" + v + "' is not one of: " + list);
    }
    return v;
  }

  double number_or(const std::string& key, double fallback, std::optional<double> lo = {},
                   std::optional<double> hi = {}) const {
    return has(key) ? (*this)[key].number(lo, hi) : fallback;
  }

  std::map<std::string, double> numbers() const {
    std::map<std::string, double> out;
    if (!node_.IsDefined() || node_.IsNull()) return out;
    if (!node_.IsMap()) fail("expected a mapping of numbers");
    for (const auto& kv : node_) out[kv.first.as<std::string>()] = (*this)[kv.first.as<std::string>()].number();
    return out;
  }

  /// Rejects keys outside `known`, catching typos.
  void only(const std::set<std::string>& known) const {
    if (!node_.IsMap()) fail("expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known.count(key)) (*this)[key].fail("unknown field");
    }
  }

  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  YAML::Node node_;
  std::string path_;
  int line_;
};

inline KernelSpec read_kernel(const Reader& r, const std::filesystem::path& base, bool observable) {
  KernelSpec k;
  static const std::set<std::string> state_gens{"thermal", "flat", "gaussian_nu", "c1_compact", "file"};
  static const std::set<std::string> obs_gens{"energy", "identity", "flat_regular", "gaussian_nu", "file"};
  k.generator = r.require("generator").text(observable ? obs_gens : state_gens);
  r.only({"generator", "beta", "lo", "hi", "sigma", "half_width", "amplitude", "value", "window", "path"});
  for (const char* key : {"beta", "lo", "hi", "sigma", "half_width", "amplitude", "value"})
    if (r.has(key)) k.params[key] = r[key].number();
  auto positive = [&](const char* key) {
    if (!k.params.count(key)) r.fail(std::string("generator '") + k.generator + "' needs '" + key + "'");
    if (!(k.params[key] > 0.0)) r[key].fail("must be positive");
  };
  if (k.generator == "thermal") {
    if (!k.params.count("beta")) r.fail("generator 'thermal' needs 'beta'");
  } else if (k.generator == "flat") {
    if (!k.params.count("lo") || !k.params.count("hi")) r.fail("generator 'flat' needs 'lo' and 'hi'");
    if (!(k.params["hi"] > k.params["lo"])) r["hi"].fail("must exceed lo");
  } else if (k.generator == "gaussian_nu") {
    positive("sigma");
  } else if (k.generator == "c1_compact") {
    positive("half_width");
  } else if (k.generator == "file") {
    k.path = base / r.require("path").text();
    if (!std::filesystem::exists(k.path)) r["path"].fail("file does not exist: " + k.path.string());
  }
  if (r.has("window")) {
    const auto w = r["window"];
    w.only({"lo", "hi", "ramp"});
    kernels::SmoothWindow win{w.require("lo").number(), w.require("hi").number(), w.number_or("ramp", 0.0, 0.0)};
    if (!(win.hi > win.lo)) w["hi"].fail("must exceed lo");
    k.window = win;
  }
  return k;
}

inline std::vector<KernelSpec> read_kernels(const Reader& r, const std::filesystem::path& base, bool observable) {
  std::vector<KernelSpec> out;
  for (std::size_t i = 0; i < r.size(); ++i) out.push_back(read_kernel(r.at(i), base, observable));
  return out;
}

inline charts::Predicate read_predicate(const Reader& r, std::size_t dims) {
  const auto type = r.require("type").text({"energy-window", "half-plane", "rectangle", "separatrix-side"});
  const bool boundary = r.has("include_boundary") ? r["include_boundary"].as<bool>() : true;
  auto vec = [&](const char* key) {
    const auto v = r.require(key);
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v.at(i).number());
    if (out.size() != dims) v.fail("expected " + std::to_string(dims) + " components");
    return out;
  };
  if (type == "energy-window") {
    r.only({"type", "include_boundary", "lo", "hi"});
    auto p = charts::Predicate::energy_window(r.require("lo").number(), r.require("hi").number(), boundary);
    if (!(p.energy_hi > p.energy_lo)) r["hi"].fail("must exceed lo");
    return p;
  }
  if (type == "half-plane") {
    r.only({"type", "include_boundary", "normal", "offset"});
    return charts::Predicate::half_plane(vec("normal"), r.number_or("offset", 0.0), boundary);
  }
  if (type == "rectangle") {
    r.only({"type", "include_boundary", "lower", "upper"});
    auto p = charts::Predicate::rectangle(vec("lower"), vec("upper"), boundary);
    for (std::size_t i = 0; i < dims; ++i)
      if (!(p.upper[i] > p.lower[i])) r["upper"].fail("each upper bound must exceed its lower bound");
    return p;
  }
  r.only({"type", "include_boundary", "side", "momentum_sign"});
  const bool inside = r.require("side").text({"inside", "outside"}) == "inside";
  const int sign = r.has("momentum_sign") ? static_cast<int>(r["momentum_sign"].number(-1, 1)) : 0;
  const bool b = r.has("include_boundary") ? r["include_boundary"].as<bool>() : !inside;
  return charts::Predicate::separatrix_side(inside, sign, b);
}

}  // namespace detail

inline bool labels_contain(const Scenario& s, const std::string& label) {
  for (const auto& c : s.charts)
    if (c.label == label) return true;
  return false;
}

inline Scenario parse_text(const std::string& text, const std::filesystem::path& file = "<string>") {
  using detail::Reader;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(file.string(), e.mark.line + 1, "<yaml>", e.msg);
  }
  const Reader r(file.string(), root, "", 1);
  if (!root.IsMap()) r.fail("scenario must be a mapping");
  r.only({"system", "hbar", "seed", "output", "energy_grid", "channels", "state", "observable", "time_grid",
          "phase_grid", "lattice", "wigner", "charts", "involution", "classical"});
  const auto base = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");

  Scenario s;
  s.file = file;
  const auto sys = r.require("system");
  sys.only({"name", "parameters"});
  s.system_name = sys.require("name").text({"harmonic", "pendulum", "separable_oscillator", "henon_heiles"});
  s.system_params = sys["parameters"].numbers();
  dynamics::System system;
  try {
    system = s.system();
  } catch (const std::exception& e) {
    sys.fail(e.what());
  }
  s.hbar = r.number_or("hbar", 1.0);
  if (!(s.hbar > 0.0)) r["hbar"].fail("must be positive");
  if (r.has("seed")) s.seed = r["seed"].as<std::uint64_t>();
  if (r.has("output")) s.output = r["output"].text();

  if (r.has("energy_grid")) {
    const auto g = r["energy_grid"];
    g.only({"min", "max", "points"});
    const double lo = g.require("min").number(), hi = g.require("max").number();
    if (!(hi > lo)) g["max"].fail("must exceed min");
    s.energy_grid = spectral::EnergyGrid::make(lo, hi, g.require("points").count(2, 1 << 16));
  }
  if (r.has("channels")) s.channels = r["channels"].count(1, 64);
  if (r.has("state")) {
    if (!s.energy_grid) r["state"].fail("a state needs an energy_grid");
    const auto st = r["state"];
    st.only({"singular", "regular", "scale"});
    if (st.has("singular")) s.state_singular = detail::read_kernels(st["singular"], base, false);
    if (st.has("regular")) s.state_regular = detail::read_kernels(st["regular"], base, false);
    s.state_scale = st.number_or("scale", 1.0, 0.0);
  }
  if (r.has("observable")) {
    if (!s.energy_grid) r["observable"].fail("an observable needs an energy_grid");
    const auto ob = r["observable"];
    ob.only({"singular", "regular"});
    if (ob.has("singular")) s.observable_singular = detail::read_kernels(ob["singular"], base, true);
    if (ob.has("regular")) s.observable_regular = detail::read_kernels(ob["regular"], base, true);
  }
  if (r.has("time_grid")) {
    const auto t = r["time_grid"];
    t.only({"start", "stop", "points"});
    TimeGrid tg{t.number_or("start", 0.0, 0.0), t.require("stop").number(), t.require("points").count(1, 1 << 20)};
    if (!(tg.stop > tg.start) && tg.points > 1) t["stop"].fail("must exceed start");
    s.time_grid = tg;
  }
  if (r.has("phase_grid")) {
    const auto g = r["phase_grid"];
    g.only({"q_min", "q_max", "n_q", "p_min", "p_max", "n_p"});
    wigner::PhaseGrid pg{g.require("q_min").number(), g.require("q_max").number(), g.require("p_min").number(),
                         g.require("p_max").number(), g.require("n_q").count(4, 8192), g.require("n_p").count(4, 8192)};
    if (pg.n_q % 2 || pg.n_p % 2) g.fail("n_q and n_p must be even");
    if (!(pg.q_max > pg.q_min) || !(pg.p_max > pg.p_min)) g.fail("each max must exceed its min");
    if (system.dof != 1) g.fail("phase_grid describes one degree of freedom; use 'lattice' for '" + s.system_name + "'");
    s.phase_grid = pg;
  }
  if (r.has("lattice")) {
    const auto l = r["lattice"];
    l.only({"lower", "upper", "points"});
    charts::Lattice lat;
    const auto lo = l.require("lower"), hi = l.require("upper"), n = l.require("points");
    for (std::size_t i = 0; i < lo.size(); ++i) lat.lo.push_back(lo.at(i).number());
    for (std::size_t i = 0; i < hi.size(); ++i) lat.hi.push_back(hi.at(i).number());
    for (std::size_t i = 0; i < n.size(); ++i) lat.n.push_back(n.at(i).count(4, 256));
    if (lat.n.size() != 2 * system.dof) l.fail("expected " + std::to_string(2 * system.dof) + " axes");
    try {
      lat.validate();
    } catch (const std::exception& e) {
      l.fail(e.what());
    }
    s.lattice = lat;
  }
  if (r.has("wigner")) {
    if (system.dof != 1) r["wigner"].fail("phase-space symbols are built for one degree of freedom");
    const auto w = r["wigner"];
    w.only({"q_min", "q_max", "n", "differentiation", "star_order", "operators", "brackets"});
    WignerSpec ws;
    ws.q_min = w.require("q_min").number();
    ws.q_max = w.require("q_max").number();
    if (!(ws.q_max > ws.q_min)) w["q_max"].fail("must exceed q_min");
    ws.n = w.require("n").count(4, 4096);
    if (ws.n % 2) w["n"].fail("must be even");
    if (w.has("differentiation"))
      ws.scheme = w["differentiation"].text({"spectral", "fd4"}) == "fd4" ? wigner::DiffScheme::FiniteDifference4
                                                                           : wigner::DiffScheme::Spectral;
    if (w.has("star_order")) ws.star_order = static_cast<int>(w["star_order"].count(0, wigner::kMaxStarOrder));
    if (w.has("operators")) {
      const auto ops = w["operators"];
      for (std::size_t i = 0; i < ops.size(); ++i) {
        const auto o = ops.at(i);
        o.only({"name", "q0", "p0", "width", "separation"});
        OperatorSpec spec;
        spec.name = o.require("name").text({"identity", "position", "ground_state", "coherent", "cat"});
        for (const char* key : {"q0", "p0", "width", "separation"})
          if (o.has(key)) spec.params[key] = o[key].number();
        ws.operators.push_back(spec);
      }
    }
    if (w.has("brackets")) {
      const auto bs = w["brackets"];
      static const std::set<std::string> symbols{"q", "p", "H", "q2", "p2", "qp", "gauss", "sinq", "cosp"};
      for (std::size_t i = 0; i < bs.size(); ++i) {
        const auto b = bs.at(i);
        b.only({"f", "g", "kind", "order"});
        BracketSpec spec{b.require("f").text(symbols), b.require("g").text(symbols),
                         b.require("kind").text({"star", "moyal", "poisson"}), ws.star_order};
        if (b.has("order")) spec.order = static_cast<int>(b["order"].count(0, wigner::kMaxStarOrder));
        ws.brackets.push_back(spec);
      }
    }
    s.wigner = ws;
  }
  if (r.has("charts")) {
    const auto cs = r["charts"];
    std::set<std::string> labels;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto c = cs.at(i);
      c.only({"label", "predicate", "priority", "section", "constants"});
      charts::Chart chart;
      chart.system = system;
      chart.label = c.require("label").text();
      if (!labels.insert(chart.label).second) c["label"].fail("duplicate chart label '" + chart.label + "'");
      chart.predicate = detail::read_predicate(c.require("predicate"), 2 * system.dof);
      if (chart.predicate.kind == charts::PredicateKind::SeparatrixSide && !system.separatrix)
        c["predicate"].fail("system '" + s.system_name + "' has no separatrix");
      chart.priority = c.has("priority") ? static_cast<int>(c["priority"].count(0, 1000)) : static_cast<int>(i);
      if (c.has("section")) {
        const auto sec = c["section"];
        sec.only({"q", "direction"});
        chart.section.q = sec.number_or("q", 0.0);
        chart.section.direction = sec.number_or("direction", 1.0) < 0 ? -1 : 1;
      }
      if (c.has("constants")) {
        const auto ks = c["constants"];
        for (std::size_t k = 0; k < ks.size(); ++k) {
          const auto kc = ks.at(k);
          kc.only({"form", "dof", "omega"});
          const auto form = kc.require("form").text({"hamiltonian", "oscillator_energy", "momentum", "angular_momentum"});
          std::map<std::string, double> params;
          for (const char* key : {"dof", "omega"})
            if (kc.has(key)) params[key] = kc[key].number();
          try {
            chart.constants.push_back(dynamics::make_constant(system, form, params));
          } catch (const std::exception& e) {
            kc.fail(e.what());
          }
        }
      }
      s.charts.push_back(std::move(chart));
    }
    if (!s.phase_grid && !s.lattice) cs.fail("charts need a phase_grid or lattice to validate against");
  }
  if (r.has("involution")) {
    const auto inv = r["involution"];
    inv.only({"tolerance", "differentiation"});
    s.involution_tolerance = inv.number_or("tolerance", 1e-6, 0.0);
    if (inv.has("differentiation"))
      s.involution_scheme = inv["differentiation"].text({"spectral", "fd4"}) == "fd4" ? wigner::DiffScheme::FiniteDifference4
                                                                                     : wigner::DiffScheme::Spectral;
  }
  if (r.has("classical")) {
    const auto c = r["classical"];
    c.only({"source", "levels", "channel_charts", "smearing", "step", "max_time", "trajectories", "flow_probe"});
    ClassicalSpec cl;
    if (c.has("source")) cl.source = c["source"].text({"levels", "state"});
    cl.smearing = c.number_or("smearing", 0.0, 0.0);
    cl.step = c.number_or("step", 1e-3, 1e-6, 1.0);
    cl.max_time = c.number_or("max_time", 1e3, 1.0);
    cl.flow_probe = c.number_or("flow_probe", 1.0, 0.0);
    if (c.has("levels")) {
      const auto ls = c["levels"];
      for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto l = ls.at(i);
        l.only({"chart", "energy", "weight"});
        LevelSpec spec{l.require("chart").text(), l.require("energy").number(), l.number_or("weight", 0.0, 0.0)};
        if (!labels_contain(s, spec.chart)) l["chart"].fail("unknown chart '" + spec.chart + "'");
        cl.levels.push_back(spec);
      }
    }
    if (c.has("channel_charts")) {
      const auto cc = c["channel_charts"];
      for (std::size_t i = 0; i < cc.size(); ++i) {
        cl.channel_charts.push_back(cc.at(i).text());
        if (!labels_contain(s, cl.channel_charts.back())) cc.at(i).fail("unknown chart");
      }
    }
    if (cl.source == "state") {
      if (s.state_singular.empty() && s.state_regular.empty()) c["source"].fail("source 'state' needs a state block");
      if (cl.channel_charts.size() != s.channels) c.fail("channel_charts needs one chart per channel");
    }
    if (c.has("trajectories")) {
      const auto ts = c["trajectories"];
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto t = ts.at(i);
        t.only({"chart", "level", "initial", "tau0", "duration", "step"});
        TrajectorySpec spec;
        if (t.has("initial")) {
          const auto x = t["initial"];
          for (std::size_t k = 0; k < x.size(); ++k) spec.initial.push_back(x.at(k).number());
          if (spec.initial.size() != 2 * system.dof) x.fail("expected " + std::to_string(2 * system.dof) + " coordinates");
        } else {
          spec.level = t.require("level").count(0, cl.levels.empty() ? 0 : cl.levels.size() - 1);
          if (cl.levels.empty()) t["level"].fail("no classical levels are declared");
        }
        if (t.has("chart")) {
          spec.chart = t["chart"].text();
          if (!labels_contain(s, spec.chart)) t["chart"].fail("unknown chart");
        }
        spec.tau0 = t.number_or("tau0", 0.0);
        spec.duration = t.require("duration").number(0.0);
        spec.step = t.number_or("step", cl.step, 1e-6, 1.0);
        cl.trajectories.push_back(spec);
      }
    }
    s.classical = cl;
  }
  return s;
}

inline Scenario load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), 0, "<file>", "cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Building objects from specs

inline spectral::SpectralKernel build_kernel(const std::vector<KernelSpec>& specs, const spectral::EnergyGrid& grid,
                                             std::size_t channels, const std::function<spectral::SpectralKernel(
                                                                           const std::filesystem::path&)>& load_file) {
  auto k = spectral::SpectralKernel::zeros(grid, channels);
  for (const auto& s : specs) {
    auto p = [&](const char* key, double fallback) {
      auto it = s.params.find(key);
      return it == s.params.end() ? fallback : it->second;
    };
    const kernels::SmoothWindow window =
        s.window.value_or(kernels::SmoothWindow{grid.omega_min, grid.omega_max, 0.0});
    spectral::SpectralKernel part;
    if (s.generator == "thermal") {
      part = kernels::thermal_singular(grid, channels, p("beta", 1.0));
    } else if (s.generator == "flat") {
      part = kernels::flat_singular(grid, channels, p("lo", grid.omega_min), p("hi", grid.omega_max));
    } else if (s.generator == "gaussian_nu") {
      part = kernels::gaussian_nu_regular(grid, channels, p("sigma", 1.0), p("amplitude", 1.0), window);
    } else if (s.generator == "c1_compact") {
      part = kernels::c1_compact_regular(grid, channels, p("half_width", 1.0), p("amplitude", 1.0), window);
    } else if (s.generator == "energy") {
      part = kernels::energy_singular(grid, channels);
    } else if (s.generator == "identity") {
      part = kernels::identity_singular(grid, channels);
    } else if (s.generator == "flat_regular") {
      part = kernels::flat_regular(grid, channels, p("value", 1.0));
    } else if (s.generator == "file") {
      part = load_file(s.path);
      if (!(part.grid == grid) || part.n_channels != channels)
        throw StructuralError("kernel file " + s.path.string() + " does not match the scenario grid/channels");
    } else {
      throw PreconditionError("unknown kernel generator '" + s.generator + "'");
    }
    k = kernels::combine(std::move(k), part);
  }
  return k;
}

}  // namespace sid::scenario
