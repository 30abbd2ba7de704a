// Command-line front end: integrate single trajectories, solve the inverse
// cone problem, sweep the shooting parameter, trace the planar limit system,
// and run the invariant verification suite.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "expsol/io.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  int workers = 1;
  double floor = 0.0;  // > 0 overrides the config's L-floor
  double tol = 0.0;    // > 0 overrides the config's shooting tolerance
};

expsol::RunSetup load(const CommonArgs& args) {
  expsol::RunSetup setup = expsol::load_run_setup(args.config);
  if (args.floor > 0.0) setup.run.l_floor = args.floor;
  if (args.tol > 0.0) setup.shoot_tol = args.tol;
  return setup;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", args.config, "JSON run configuration");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--workers", args.workers, "concurrent runs (sweep only)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--floor", args.floor, "override the L-floor")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", args.tol, "override the shooting tolerance")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"expanding-soliton trajectory laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* integrate = app.add_subcommand("integrate", "run one trajectory");
  add_common(integrate, args);
  auto* shoot = app.add_subcommand("shoot", "realize a target cone");
  add_common(shoot, args);
  auto* sweep_cmd = app.add_subcommand("sweep", "sigma_1 over a C grid");
  add_common(sweep_cmd, args);
  auto* verify = app.add_subcommand("verify", "invariant suite, pass/fail table");
  add_common(verify, args);

  auto* subsystem = app.add_subcommand("subsystem", "planar limit trajectory");
  int sub_d = 2;
  double sub_offset = 1e-8;
  std::string sub_out;
  subsystem->add_option("-d,--dimension", sub_d, "sphere factor dimension")
      ->check(CLI::Range(2, 1000));
  subsystem->add_option("--offset", sub_offset, "eigenvector seed offset")
      ->check(CLI::PositiveNumber);
  subsystem->add_option("--out", sub_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (integrate->parsed())
      return expsol::cmd_integrate(load(args), args.config, args.out);
    if (shoot->parsed())
      return expsol::cmd_shoot(load(args), args.config, args.out);
    if (sweep_cmd->parsed())
      return expsol::cmd_sweep(load(args), args.config, args.out, args.workers);
    if (verify->parsed()) return expsol::cmd_verify(load(args));
    if (subsystem->parsed())
      return expsol::cmd_subsystem(sub_d, sub_offset, sub_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
