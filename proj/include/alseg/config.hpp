#pragma once

// JSON run configuration. Every key is optional and falls back to the
// RunConfig defaults; unknown keys are rejected so that typos in sweep files
// fail loudly.
//
// {
//   "seed": 0,
//   "dataset":  {"n_samples": 300, "height": 32, "width": 32, "n_classes": 3,
//                "noise_a": 0.05, "noise_b": 0.10},
//   "split":    {"n_initial": 16, "n_val": 20, "n_test": 60},
//   "model":    {"n_ch": 8},
//   "strategy": {"name": "UNC+ECD", "n_unc": 16, "n_rep": 8},
//   "n_i": 17,
//   "train":    {"learning_rate": 5e-4, "dropout_rate": 0.5, "batch_size": 8,
//                "steps_per_stage": 500, "retrain_mode": "from_scratch"},
//   "lambda":   {"mode": "paper_formula", "value": 0.0},
//   "n_al_steps": 6
// }
//
// lambda.mode is one of paper_formula | explicit | off. When the "lambda"
// section is absent the mode follows the strategy: paper_formula for the ECD
// variants, off for everything else.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "alseg/alloop.hpp"

namespace alseg::config {

struct ConfigDocument {
  alloop::RunConfig run;
  // True when the file did not choose a lambda mode.
  bool lambda_follows_strategy = true;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
};

// Throws ConfigError naming the offending field (e.g. "train.batch_size").
ConfigDocument parse_config(std::string_view json_text);
ConfigDocument load_config(const std::filesystem::path& path);

// Applies command-line overrides and resolves a strategy-dependent lambda
// mode, then validates. Throws ConfigError.
alloop::RunConfig resolve(ConfigDocument doc, const Overrides& overrides = {});

std::string_view to_string(alloop::LambdaMode mode);
std::string_view to_string(alloop::RetrainMode mode);

// Fully resolved configuration in the input schema with a fixed key order;
// parse_config accepts the output and reproduces the same RunConfig.
std::string dump_resolved(const alloop::RunConfig& config, int indent = 2);

}  // namespace alseg::config
