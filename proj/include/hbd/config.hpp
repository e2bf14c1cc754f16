#pragma once

// Experiment configuration: a sectioned INI file. Unknown sections or keys
// are errors. See docs/formats.md for every key and its default.

#include "hbd/dataset.hpp"
#include "hbd/model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModeSelection { adaptive, baseline, both };
enum class SelectionRule { adaptive, uniform };

struct ExperimentConfig {
  // [dataset]
  std::string source = "synthetic";  // or a CSV path readable by ingest_features
  RadiusPolicy radius_policy = RadiusPolicy::as_is;
  SyntheticOptions synthetic;

  // [trigger]
  double alpha = 0.35;
  double beta = 1.0;
  double noise_sigma = 0.01;
  double projection_radius = 0.95;
  double sparsity_fraction = 0.30;

  // [poison]
  int target_class = 0;
  double poison_fraction = 0.05;
  double sigma = 1.0;
  double gamma = 1.0;
  SelectionRule selection = SelectionRule::adaptive;

  // [train]
  TrainConfig train;
  std::vector<std::size_t> hidden{64, 32};

  // [detector]
  double tau = 0.13;

  // [experiment]
  ModeSelection modes = ModeSelection::both;
  std::uint64_t seed = 0;
  int trials = 3;
  std::filesystem::path out_dir = "out";
  int parallel = 1;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
  /// Trial i uses seed + i.
  std::vector<std::uint64_t> trial_seeds() const;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

std::string to_string(ModeSelection m);
ModeSelection parse_mode_selection(const std::string& s);

}  // namespace hbd
