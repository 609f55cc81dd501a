#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "memstab/app.hpp"
#include "memstab/errors.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  std::optional<std::size_t> modes;
  std::optional<unsigned> workers;
};

void add_flags(CLI::App* cmd, Flags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "JSON run configuration");
  if (config_required) opt->required();
  cmd->add_option("--out", f.out, "output directory (default: config \"out\", else ./out)");
  cmd->add_option("--seed", f.seed, "master seed, overrides sim.seed");
  cmd->add_option("--paths", f.paths, "Monte Carlo paths, overrides sim.n_paths");
  cmd->add_option("--dt", f.dt, "time step, overrides sim.dt");
  cmd->add_option("--modes", f.modes, "Galerkin modes, overrides model.n_modes");
  cmd->add_option("--workers", f.workers, "worker threads (0: all cores)");
}

memstab::RunConfig resolve(const Flags& f, bool demo) {
  memstab::RunConfig cfg =
      demo && f.config.empty() ? memstab::demo_config() : memstab::parse_config(f.config);
  if (f.out) cfg.out_dir = *f.out;
  if (f.seed) cfg.sim.master_seed = *f.seed;
  if (f.paths) cfg.sim.n_paths = *f.paths;
  if (f.dt) cfg.sim.dt = *f.dt;
  if (f.modes) cfg.model.n_modes = *f.modes;
  if (f.workers) cfg.sim.workers = *f.workers;
  memstab::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Exponential-stability certificates and Monte Carlo checks for a stochastic heat "
      "equation with finite memory.\n"
      "Exit codes: 0 all checks pass, 1 a verification check failed, 2 no certificate "
      "(coercivity or boundedness condition fails), 3 configuration or I/O error.\n"
      "Config defaults: sim.dt 2^-10, sim.T 10, sim.n_paths 200, sim.seed 1, "
      "sim.output_stride 16, model.n_modes 16, model.phi {\"constant\": [1]}, model.r 1, "
      "certificate.gamma1_fraction 0.1, certificate.safety 0.95, certificate.tol 1e-9, "
      "certificate.r3_weight \"sigma1\", verify.ci_mult 3, verify.window_fraction 0.5, "
      "verify.N0 2, energy.levels 4, energy.paths 20, energy.T 2."};
  app.require_subcommand(1);

  Flags flags;
  auto* certify = app.add_subcommand("certify", "build the decay certificate");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo paths, curve.csv, paths_summary.csv");
  auto* verify = app.add_subcommand("verify", "simulate and confront the certificate");
  auto* energy = app.add_subcommand("energy-check", "energy identity refinement study");
  auto* demo = app.add_subcommand("demo", "feasible scenario end to end");
  for (auto* cmd : {certify, simulate, verify, energy}) add_flags(cmd, flags, true);
  add_flags(demo, flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : memstab::kExitConfigError;
  }

  try {
    const bool is_demo = demo->parsed();
    const auto cfg = resolve(flags, is_demo);
    if (certify->parsed()) return memstab::cmd_certify(cfg, std::cout);
    if (simulate->parsed()) return memstab::cmd_simulate(cfg, std::cout);
    if (verify->parsed()) return memstab::cmd_verify(cfg, std::cout);
    if (energy->parsed()) return memstab::cmd_energy(cfg, std::cout);
    return memstab::cmd_demo(cfg, std::cout);
  } catch (const memstab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return memstab::kExitConfigError;
}
