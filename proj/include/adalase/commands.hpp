#pragma once

// Subcommands behind the `adalase` executable. Each returns a process exit
// code: 0 on success, 2 for invalid configuration or missing inputs (nothing
// is written in that case), 1 for failures during a run.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adalase/config.hpp"
#include "adalase/trainer.hpp"

namespace adalase {

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::size_t runs = 1;
};

int cmd_train(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
              std::ostream& err);
int cmd_audit(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
              std::ostream& err);
int cmd_sweep_lower_limit(const std::filesystem::path& config, const CommandOptions& opts,
                          std::ostream& out, std::ostream& err);
int cmd_sweep_eta(const std::filesystem::path& config, const CommandOptions& opts,
                  std::ostream& out, std::ostream& err);
int cmd_validate_config(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

/// Kd values of the lower-limit sweep.
inline const std::vector<double> kSweepKd = {0.1, 0.2, 0.3, 0.4, 0.5};
/// Step sizes of the eta sweep.
inline const std::vector<double> kSweepEta = {0.1, 0.01, 0.001};

// CSV renderers, exposed for tests.
std::string metrics_csv(const TrainResult& result, std::size_t positions);
std::string ratios_csv(const TrainResult& result, std::size_t positions);

}  // namespace adalase
