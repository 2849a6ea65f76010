// Command-line front end: sid <validate|decohere|wigner|classical|verify> [options]

#include <iostream>

#include "CLI11.hpp"

#include "sid/commands.hpp"

namespace {

void print_summary(const sid::commands::RunReport& r, const sid::commands::Options& o) {
  if (o.verbosity < 1) return;
  std::size_t failed = 0;
  for (const auto& c : r.invariants) failed += c.pass ? 0 : 1;
  if (r.command != "verify") {
    for (const auto& c : r.invariants)
      std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.name << ": " << sid::io::number(c.measured) << ' ' << c.relation
                << ' ' << sid::io::number(c.bound) << '\n';
  }
  for (const auto& w : r.warnings) std::cout << "warning: " << w << '\n';
  std::cout << r.command << ": " << r.invariants.size() - failed << '/' << r.invariants.size()
            << " invariants hold, " << r.manifest.size() << " files written, exit " << r.exit_code << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral decoherence pipeline: van Hove states, Wigner symbols, classical charts"};
  app.require_subcommand(1, 1);

  sid::commands::Options opt;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    auto* s = sub->add_option("--scenario,-s", opt.scenario, "scenario YAML file");
    if (needs_scenario) s->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", opt.out, "output directory (default: the scenario's `output` field)");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--threads,-j", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--verbosity,-v", opt.verbosity, "0 quiet, 1 summary, 2 detail")->check(CLI::Range(0, 2));
  };

  auto* validate = app.add_subcommand("validate", "check the state, the chart partition and involution");
  auto* decohere = app.add_subcommand("decohere", "decay curve, weak limit and pointer basis");
  auto* wigner = app.add_subcommand("wigner", "phase-space symbols, star products and brackets");
  auto* classical = app.add_subcommand("classical", "action-angle charts, classical density and trajectories");
  auto* verify = app.add_subcommand("verify", "built-in property suite");
  for (auto* sub : {validate, decohere, wigner, classical}) add_common(sub, true);
  add_common(verify, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sid::commands::kExitParse;
  }
  for (auto* sub : {validate, decohere, wigner, classical, verify})
    if (sub->get_option("--seed")->count() > 0) opt.seed = seed;

  sid::commands::RunReport report;
  try {
    if (*validate) report = sid::commands::cmd_validate(opt);
    else if (*decohere) report = sid::commands::cmd_decohere(opt);
    else if (*wigner) report = sid::commands::cmd_wigner(opt);
    else if (*classical) report = sid::commands::cmd_classical(opt);
    else report = sid::commands::cmd_verify(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sid::commands::kExitNumerical;
  }
  print_summary(report, opt);
  return report.exit_code;
}
