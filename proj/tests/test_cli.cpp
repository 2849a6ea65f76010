#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "sid/io.hpp"
#include "sid/kernels.hpp"
#include "sid/scenario.hpp"

namespace fs = std::filesystem;
using namespace sid;

namespace {

const fs::path kScenarios = SID_SCENARIO_DIR;

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr together
  fs::path dir;
};

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("sid-cli-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Run cli(const std::string& name, const std::string& args) {
  Run r;
  r.dir = scratch(name);
  const fs::path log = r.dir / "log.txt";
  const std::string cmd = std::string("\"") + SID_CLI_PATH + "\" " + args + " --out \"" + (r.dir / "out").string() +
                          "\" > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = io::read_file(log);
  return r;
}

std::string scenario_arg(const fs::path& p) { return "--scenario \"" + p.string() + "\""; }

std::string first_line(const fs::path& p) {
  const std::string s = io::read_file(p);
  return s.substr(0, s.find('\n'));
}

}  // namespace

TEST(Cli, ValidScenariosExitZero) {
  const std::pair<const char*, const char*> runs[] = {
      {"decohere", "gaussian_decay.yaml"}, {"decohere", "singular_only.yaml"}, {"validate", "pendulum_two_chart.yaml"},
      {"validate", "separable_two_dof.yaml"}, {"validate", "henon_heiles.yaml"}, {"classical", "annulus_from_state.yaml"},
  };
  int i = 0;
  for (const auto& [cmd, file] : runs) {
    const auto r = cli("ok" + std::to_string(i++), std::string(cmd) + " " + scenario_arg(kScenarios / file));
    EXPECT_EQ(r.code, 0) << cmd << ' ' << file << '\n' << r.out;
  }
}

TEST(Cli, InvalidScenariosExitWithTheirCode) {
  const std::pair<const char*, int> runs[] = {
      {"trace_not_one.yaml", 3},
      {"overlapping_charts.yaml", 3},
      {"henon_heiles_extra_constant.yaml", 3},
      {"bad_field.yaml", 2},
  };
  for (const auto& [file, code] : runs) {
    const auto r = cli("bad", "validate " + scenario_arg(kScenarios / "invalid" / file));
    EXPECT_EQ(r.code, code) << file << '\n' << r.out;
  }
}

TEST(Cli, TraceViolationIsNamed) {
  const auto r = cli("trace", "validate " + scenario_arg(kScenarios / "invalid" / "trace_not_one.yaml"));
  EXPECT_NE(r.out.find("normalization"), std::string::npos) << r.out;
}

TEST(Cli, ParseErrorNamesLineAndField) {
  const auto r = cli("parse", "validate " + scenario_arg(kScenarios / "invalid" / "bad_field.yaml"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("bad_field.yaml:3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("energy_grid.pionts"), std::string::npos) << r.out;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("usage0", "frobnicate").code, 2);
  EXPECT_EQ(cli("usage1", "validate").code, 2);
  EXPECT_EQ(cli("usage2", "validate " + scenario_arg(kScenarios / "missing.yaml")).code, 2);
}

TEST(Cli, ManifestMatchesFilesOnDisk) {
  const auto r = cli("manifest", "decohere " + scenario_arg(kScenarios / "gaussian_decay.yaml"));
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path out = r.dir / "out";
  const auto report = io::Json::parse(io::read_file(out / "report.json"));
  EXPECT_EQ(report.at("command"), "decohere");
  EXPECT_EQ(report.at("exit_code"), 0);
  ASSERT_EQ(report.at("manifest").size(), 3u);
  for (const auto& e : report.at("manifest")) {
    const std::string bytes = io::read_file(out / e.at("file").get<std::string>());
    EXPECT_EQ(e.at("bytes").get<std::size_t>(), bytes.size());
    EXPECT_EQ(e.at("sha256").get<std::string>(), io::sha256(bytes));
  }
  for (const auto& inv : report.at("invariants")) EXPECT_TRUE(inv.at("pass").get<bool>()) << inv.dump();
  EXPECT_EQ(first_line(out / "decay.csv"), "t,total,regular_re,regular_im");
  const auto state = io::state_from(io::deserialize(io::read_file(out / "decohered.sidc")));
  EXPECT_TRUE(state.kernel.regular_is_zero());
}

TEST(Cli, ClassicalAndWignerFiles) {
  const auto c = cli("classical", "classical " + scenario_arg(kScenarios / "harmonic.yaml"));
  ASSERT_EQ(c.code, 0) << c.out;
  EXPECT_EQ(first_line(c.dir / "out" / "density.csv"), "q,p,re,im");
  EXPECT_EQ(first_line(c.dir / "out" / "trajectory_0.csv"), "t,q,p,H,P1");
  const auto f = io::field_from(io::deserialize(io::read_file(c.dir / "out" / "density.sidc")));
  EXPECT_EQ(f.grid.n_q, 256u);

  const auto w = cli("wigner", "wigner " + scenario_arg(kScenarios / "ground_state.yaml"));
  ASSERT_EQ(w.code, 0) << w.out;
  EXPECT_TRUE(fs::exists(w.dir / "out" / "wigner_2_ground_state.sidc"));
  EXPECT_EQ(w.out.find("FAIL"), std::string::npos) << w.out;
}

TEST(Cli, ValidityWarningBeyondTheQuadratureLimit) {
  const fs::path dir = scratch("validity");
  std::string text = io::read_file(kScenarios / "gaussian_decay.yaml");
  const std::string from = "time_grid: {start: 0, stop: 10, points: 201}";
  ASSERT_NE(text.find(from), std::string::npos);
  text.replace(text.find(from), from.size(), "time_grid: {start: 0, stop: 20, points: 201}");
  io::write_file(dir / "long.yaml", text);
  const auto r = cli("validity_run", "decohere " + scenario_arg(dir / "long.yaml"));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto report = io::Json::parse(io::read_file(r.dir / "out" / "report.json"));
  ASSERT_FALSE(report.at("warnings").empty());
  EXPECT_NE(report.at("warnings")[0].get<std::string>().find("validity"), std::string::npos);
}

TEST(Container, StateRoundTripIsExact) {
  const auto g = spectral::EnergyGrid::make(0.0, 4.0, 17);
  auto k = kernels::flat_singular(g, 2, 1.0, 3.0);
  k.reg(3, 5, 0, 1) = {0.25, -0.125};
  k.reg(5, 3, 1, 0) = {0.25, 0.125};
  const spectral::VanHoveState s{k, 0.7};
  const auto back = io::state_from(io::deserialize(io::serialize(io::to_container(s))));
  EXPECT_EQ(back.hbar, 0.7);
  EXPECT_EQ(back.kernel.n_channels, 2u);
  EXPECT_EQ(back.kernel.grid.n_points, 17u);
  EXPECT_EQ(back.kernel.singular, k.singular);
  EXPECT_EQ(back.kernel.regular, k.regular);
}

TEST(Container, FieldRoundTripIsExact) {
  const auto g = wigner::PhaseGrid::make(-2, 2, 8, -3, 3, 12);
  const auto f = wigner::PhaseSpaceField::sample(g, 0.5, [](double q, double p) { return q * q - 0.5 * p; });
  const auto back = io::field_from(io::deserialize(io::serialize(io::to_container(f))));
  EXPECT_EQ(back.values, f.values);
  EXPECT_EQ(back.hbar, 0.5);
  EXPECT_EQ(back.grid.n_p, 12u);
  EXPECT_EQ(back.grid.p_max, 3.0);
}

TEST(Container, RejectsDamagedBytes) {
  const auto g = spectral::EnergyGrid::make(0.0, 1.0, 3);
  const std::string good = io::serialize(io::to_container(spectral::VanHoveState{kernels::flat_singular(g, 1, 0, 1), 1.0}));
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(io::deserialize(bad), io::FormatError);
  EXPECT_THROW(io::deserialize(good.substr(0, good.size() - 4)), io::FormatError);
  EXPECT_THROW(io::deserialize(good + "x"), io::FormatError);
  EXPECT_THROW(io::field_from(io::deserialize(good)), io::FormatError);
}

TEST(Digest, KnownSha256) {
  EXPECT_EQ(io::sha256("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ScenarioParse, UnknownKeyReportsLine) {
  const std::string text = "system: {name: harmonic}\nhbar: 1\nenergy_grid: {min: 0, max: 1, points: 5}\nchanels: 2\n";
  try {
    scenario::parse_text(text, "t.yaml");
    FAIL() << "expected a scenario error";
  } catch (const scenario::ScenarioError& e) {
    EXPECT_EQ(e.line(), 4);
    EXPECT_EQ(e.field(), "chanels");
  }
}

TEST(ScenarioParse, WrongTypeAndMissingSystem) {
  EXPECT_THROW(scenario::parse_text("system: {name: harmonic}\nhbar: fast\n"), scenario::ScenarioError);
  EXPECT_THROW(scenario::parse_text("hbar: 1\n"), scenario::ScenarioError);
  EXPECT_THROW(scenario::parse_text("system: {name: harmonic\n"), scenario::ScenarioError);
}

TEST(ScenarioParse, ShippedScenariosLoad) {
  for (const auto& e : fs::directory_iterator(kScenarios))
    if (e.path().extension() == ".yaml") {
      EXPECT_NO_THROW(scenario::load(e.path())) << e.path();
    }
}

TEST(ScenarioParse, Cleanup) { fs::remove_all(fs::temp_directory_path() / ("sid-cli-test-" + std::to_string(::getpid()))); }
