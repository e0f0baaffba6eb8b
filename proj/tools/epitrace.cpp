#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "epitrace/cli.hpp"

int main(int argc, char** argv) {
  using namespace epitrace::cli;
  CLI::App app{"Contact-tracing ledger simulator"};
  app.footer(std::string("\n") + kTableHelp +
             "\n\nExit codes: 0 ok, 1 config error, 2 runtime error, 3 verification failure."
             "\nEPITRACE_LOG=0|1|2 sets stderr verbosity (quiet, info, debug).");

  RunManifest m;
  std::string mode = "single", out = "out";
  std::uint64_t seed = 0;
  int rounds = 0;
  app.add_option("--config", m.config_path, "Scenario config file (key = value)");
  app.add_option("--mode", mode, "single, sweep, fit, verify or explain")
      ->check(CLI::IsMember({"single", "sweep", "fit", "verify", "explain"}));
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out", out, "Output directory");
  auto* rounds_opt = app.add_option("--rounds", rounds, "Override sweep rounds (>= 2)");
  app.add_option("--data", m.data_path, "Dataset for fit mode");
  app.add_option("--ledger", m.ledger_path, "Ledger dump to check in verify mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }
  m.mode = *parse_mode(mode);
  m.out_dir = out;
  if (*seed_opt) m.seed = seed;
  if (*rounds_opt) m.rounds = rounds;
  return cmd_run(m);
}
