// adalase: train, audit, sweep-kd, sweep-eta, validate.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "adalase/commands.hpp"
#include "adalase/kernels.hpp"

namespace {

void apply_thread_env() {
  const char* env = std::getenv("ADALASE_THREADS");
  if (env == nullptr || *env == '\0') return;
  try {
    const int n = std::stoi(env);
    if (n >= 1) adalase::kernels::set_max_threads(n);
  } catch (const std::exception&) {
    std::cerr << "warning: ignoring ADALASE_THREADS='" << env << "'\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive augmentation-position training engine"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t runs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--out", out_dir, "Override the output directory");
  };
  auto* train = app.add_subcommand("train", "Run one training and write metrics");
  add_common(train);
  auto* audit = app.add_subcommand("audit", "Worst-layer selection audit over several seeds");
  add_common(audit);
  audit->add_option("--runs", runs, "Number of seeded runs")->check(CLI::PositiveNumber);
  auto* sweep = app.add_subcommand("sweep-kd", "Lower-limit sweep over Kd in {0.1..0.5}");
  add_common(sweep);
  auto* sweep_eta = app.add_subcommand("sweep-eta", "Step-size sweep over eta in {0.1, 0.01, 0.001}");
  add_common(sweep_eta);
  auto* validate = app.add_subcommand("validate", "Check a config and print it normalized");
  validate->add_option("--config", config, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);
  apply_thread_env();

  adalase::CommandOptions opts;
  opts.runs = runs;
  for (auto* cmd : {train, audit, sweep, sweep_eta}) {
    if (cmd->parsed()) {
      if (cmd->count("--seed") > 0) opts.seed = seed;
      if (cmd->count("--out") > 0) opts.out = out_dir;
    }
  }

  if (train->parsed()) return adalase::cmd_train(config, opts, std::cout, std::cerr);
  if (audit->parsed()) return adalase::cmd_audit(config, opts, std::cout, std::cerr);
  if (sweep->parsed()) return adalase::cmd_sweep_lower_limit(config, opts, std::cout, std::cerr);
  if (sweep_eta->parsed()) return adalase::cmd_sweep_eta(config, opts, std::cout, std::cerr);
  return adalase::cmd_validate_config(config, std::cout, std::cerr);
}
