#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "polylut/dataset.hpp"
#include "polylut/network.hpp"
#include "polylut/trainer.hpp"

namespace polylut {

/// Where the data comes from. Relative paths resolve against the config
/// file's directory.
struct DatasetConfig {
  std::string kind;  // "spirals", "csv", "idx", or empty (none configured)
  // spirals
  std::size_t n_per_class = 500;
  double noise_sd = 0.1;
  double turns = 1.75;
  std::uint64_t seed = 7;
  // csv
  std::string path;
  std::string label_column;
  std::vector<std::string> feature_columns;
  // idx: explicit train/test files
  std::string train_images, train_labels, test_images, test_labels;
  // csv and spirals
  double train_fraction = 0.8;
  std::uint64_t split_seed = 11;

  bool operator==(const DatasetConfig&) const = default;
};

struct ExperimentConfig {
  std::string profile;
  NetworkSpec network;
  TrainConfig training;
  DatasetConfig dataset;
  std::string base_dir = ".";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Network, training defaults and (for spiral) dataset of a bundled profile.
ExperimentConfig profile_config(const std::string& name);

/// Parses the JSON config schema:
///
///   {
///     "profile": "jsc-m",                       // optional base preset
///     "network":  { "input_features", "layer_widths", "beta", "fan_in",
///                   "degree", "input_beta", "input_fan_in", "seed",
///                   "clock_period_ns", "max_table_bits" },
///     "training": { "epochs", "batch_size", "base_lr", "min_lr",
///                   "weight_decay", "restart_period", "restart_mult",
///                   "seed", "loss": "softmax"|"bce", "bn_momentum",
///                   "scale_lr_mult" },
///     "dataset":  { "kind": "spirals"|"csv"|"idx", ... }
///   }
///
/// Unknown keys and type errors raise ConfigError naming the field path.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

/// FNV-1a hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Network truncated to `layers` layers by removing trailing hidden layers;
/// the output layer is kept.
NetworkSpec with_depth(const NetworkSpec& spec, std::size_t layers);

/// Loads (or generates) the configured data; returns normalized train/test.
/// Throws ConfigError if no dataset is configured or a file is missing.
std::pair<Dataset, Dataset> load_dataset(const ExperimentConfig& config);

}  // namespace polylut
