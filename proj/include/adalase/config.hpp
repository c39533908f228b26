#pragma once

// Experiment configuration: a strict JSON document. Unknown keys and
// wrongly typed values are rejected with the dotted path of the field.
//
//   {
//     "preset": "mlp-fig3",
//     "seed": 1,
//     "output_dir": "runs/mlp-fig3",
//     "data":  { "source": "synthetic", ... },
//     "model": { "arch": "mlp", "hidden": [1, 8, 8] },
//     "train": { "epochs": 20, "train_aug": { "kind": "cutout" }, ... },
//     "adalase": { "eta": 1.0 }
//   }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adalase/data.hpp"
#include "adalase/network.hpp"
#include "adalase/trainer.hpp"

namespace adalase {

enum class DataSource { synthetic, idx, cifar, raw };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  // synthetic
  SyntheticKind generator = SyntheticKind::striped_patches;
  SyntheticOptions synthetic;
  std::size_t train_pool = 2000;
  std::size_t test_pool = 1000;
  std::uint64_t data_seed = 7;
  // file-backed sources; test_* may be empty for raw/cifar when a test file is given
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  // split
  std::size_t train_count = 0;
  std::size_t val_count = 0;
  std::size_t test_count = 0;
  std::uint64_t split_seed = 0;
};

enum class Arch { mlp, tiny_resnet };

struct ModelConfig {
  Arch arch = Arch::mlp;
  MapShape hidden{1, 8, 8};
  std::size_t channels = 8;
  /// Optional ADLW checkpoint loaded after initialization.
  std::filesystem::path init_checkpoint;
};

struct ExperimentConfig {
  std::string preset;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
};

/// Parses and validates. Throws ConfigError (with field path) on unknown
/// keys, bad types, out-of-range values or malformed JSON.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully expanded effective configuration.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Throws ConfigError when a referenced dataset or checkpoint is missing.
void check_paths(const ExperimentConfig& cfg);

DataSplits build_data(const ExperimentConfig& cfg);
Network build_network(const ExperimentConfig& cfg, const MapShape& input, std::size_t classes);

}  // namespace adalase
