#pragma once

// Flat "key = value" experiment configuration. '#' starts a comment; unknown
// keys are rejected; every key has a default (see config_keys()).

#include "varmaformer/model.hpp"
#include "varmaformer/trainer.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace varmaformer {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string dataset;          // CSV path
  std::string split = "auto";   // auto | ett-hourly | ett-minute | ratio
  ModelConfig model;
  TrainConfig train;            // train.seed mirrors `seed`
  std::uint64_t seed = 2024;    // model init and training stream
  std::size_t seeds = 1;        // grid commands run seed, seed+1, ...
  std::vector<std::size_t> horizons;  // grid commands; empty means {model.horizon}
  std::size_t train_stride = 1; // keep every k-th training window
  std::string out = "out";
};

struct ConfigKey {
  std::string name;
  std::string description;
};

const std::vector<ConfigKey>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
// Applies "key = value" lines on top of `config`.
void apply_config_text(ExperimentConfig& config, const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string get_setting(const ExperimentConfig& config, const std::string& key);
// Every key, one "key = value" line each, in config_keys() order.
std::string to_config_text(const ExperimentConfig& config);

// Model/train constraints plus grid settings; throws ConfigError.
void validate(const ExperimentConfig& config);

}  // namespace varmaformer
