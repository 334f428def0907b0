// dipsim: experiment runner for the sparse-MLP Flash/DRAM simulator.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dipsim/cli/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool per_token = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output path (overrides config 'output')");
  cmd->add_option("--seed", c.seed, "Seed (overrides config)");
  cmd->add_option("--threads", c.threads, "Worker threads for sweeps");
  cmd->add_flag("--per-token", c.per_token, "Include per-token records in run reports");
}

dipsim::cli::Overrides overrides(const Common& c) {
  dipsim::cli::Overrides o;
  if (!c.out.empty()) o.out = c.out;
  o.seed = c.seed;
  o.threads = c.threads;
  o.per_token = c.per_token;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dipsim - dynamic-sparsity Flash/DRAM inference simulator"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, gamma_opts, alloc_opts, gen_opts;
  std::string weights_out;
  auto* run = app.add_subcommand("run", "Simulate one configuration and write a report");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "Density (and gamma) sweep with throughput-at-error summary");
  add_common(sweep, sweep_opts);
  auto* gamma = app.add_subcommand("gamma-sweep", "DIP-CA gamma x density table");
  add_common(gamma, gamma_opts);
  auto* alloc = app.add_subcommand("calibrate-allocation", "Fit the input/intermediate density split");
  add_common(alloc, alloc_opts);
  auto* gen = app.add_subcommand("gen-trace", "Write a synthetic activation trace");
  add_common(gen, gen_opts);
  gen->add_option("--weights-out", weights_out, "Also write matching synthetic MLP weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dipsim::cli::kValidationError;
  }

  using namespace dipsim::cli;
  if (*run) return cmd_run(run_opts.config, overrides(run_opts), std::cerr);
  if (*sweep) return cmd_sweep(sweep_opts.config, overrides(sweep_opts), std::cerr);
  if (*gamma) return cmd_gamma_sweep(gamma_opts.config, overrides(gamma_opts), std::cerr);
  if (*alloc) return cmd_calibrate_allocation(alloc_opts.config, overrides(alloc_opts), std::cerr);
  if (*gen) {
    std::optional<std::filesystem::path> w;
    if (!weights_out.empty()) w = weights_out;
    return cmd_gen_trace(gen_opts.config, overrides(gen_opts), w, std::cerr);
  }
  return kValidationError;
}
