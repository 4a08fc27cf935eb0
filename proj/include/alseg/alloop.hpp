#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "alseg/metrics.hpp"
#include "alseg/micronet.hpp"
#include "alseg/selection.hpp"
#include "alseg/synthdata.hpp"

namespace alseg::alloop {

enum class LambdaMode {
  kPaperFormula,  // 1 / (360 * |R_abst|)
  kExplicit,      // lambda_value
  kOff,           // 0
};

enum class RetrainMode { kFromScratch, kContinue };

struct RunConfig {
  std::uint64_t seed = 0;
  synthdata::GeneratorConfig dataset;
  std::size_t n_initial = 16;
  std::size_t n_val = 20;
  std::size_t n_test = 60;
  std::size_t n_ch = 8;
  selection::Strategy strategy;
  std::size_t n_i = 17;
  micronet::Hyper hyper;  // hyper.lambda is ignored; see resolved_lambda()
  LambdaMode lambda_mode = LambdaMode::kPaperFormula;
  double lambda_value = 0.0;
  std::size_t n_al_steps = 6;
  std::size_t train_steps_per_stage = 500;
  RetrainMode retrain_mode = RetrainMode::kFromScratch;

  double resolved_lambda() const;
  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct StepRecord {
  metrics::StepMetrics metrics;
  // The batch annotated right before this step's training; empty for step 0.
  std::optional<selection::QueryBatch> batch;
  // Seed of the MC-dropout passes that scored the pool for `batch`; shared by
  // every pool sample of the step.
  std::optional<std::uint64_t> mc_seed;
};

struct RunRecord {
  RunConfig config;
  double lambda = 0.0;
  std::vector<StepRecord> steps;
  // stage_models[s] is the model evaluated at step s.
  std::vector<micronet::ModelParams> stage_models;
  bool truncated = false;
};

// Argmax over the class axis of [n_cl,H,W] logits; returns [H,W] class ids.
Tensor predict_labels(const Tensor& logits);

// Per-class and mean-foreground Dice/MSD averaged over samples.
metrics::StepMetrics evaluate_label_maps(std::span<const Tensor> predictions, std::span<const Tensor* const> truths,
                                         std::size_t n_cl);

metrics::StepMetrics evaluate_model(const micronet::ModelParams& params,
                                    std::span<const synthdata::Sample* const> test_set);

using StepObserver = std::function<void(const StepRecord&)>;

// initial training, then n_al_steps rounds of score -> query -> annotate ->
// retrain -> evaluate. Stops early (truncated = true) if the pool runs dry.
RunRecord run_active_learning(const RunConfig& config, const StepObserver& observer = {});

struct UpperBoundResult {
  metrics::StepMetrics metrics;
  micronet::ModelParams params;
};

// Same data and split, but the entire pool is annotated before the single
// training stage.
UpperBoundResult run_upper_bound(const RunConfig& config);

}  // namespace alseg::alloop
