#include "alseg/alloop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "alseg/error.hpp"
#include "alseg/inference.hpp"
#include "alseg/rng.hpp"

namespace alseg::alloop {
namespace {

using Clock = std::chrono::steady_clock;

std::vector<micronet::TrainingExample> examples_for(const std::set<SampleId>& ids,
                                                    std::span<const synthdata::Sample> dataset) {
  std::vector<micronet::TrainingExample> out;
  out.reserve(ids.size());
  for (const SampleId id : ids) {
    const synthdata::Sample& s = dataset[static_cast<std::size_t>(id)];
    out.push_back({&s.image, &s.label});
  }
  return out;
}

std::vector<const synthdata::Sample*> samples_for(const std::set<SampleId>& ids,
                                                  std::span<const synthdata::Sample> dataset) {
  std::vector<const synthdata::Sample*> out;
  out.reserve(ids.size());
  for (const SampleId id : ids) out.push_back(&dataset[static_cast<std::size_t>(id)]);
  return out;
}

micronet::ModelParams train_stage(const RunConfig& cfg, const micronet::Hyper& hyper, std::size_t stage,
                                  micronet::ModelParams previous, const std::set<SampleId>& annotated,
                                  std::span<const synthdata::Sample> dataset) {
  micronet::ModelParams start = (stage == 0 || cfg.retrain_mode == RetrainMode::kFromScratch)
                                    ? micronet::init_params(derive_seed(cfg.seed, stage, Stream::kInit), cfg.n_ch,
                                                            cfg.dataset.n_cl)
                                    : std::move(previous);
  const auto examples = examples_for(annotated, dataset);
  return micronet::train(std::move(start), examples, hyper, cfg.train_steps_per_stage,
                         derive_seed(cfg.seed, stage, Stream::kTrain))
      .params;
}

selection::PoolFeatures score_pool(const RunConfig& cfg, const micronet::ModelParams& params,
                                   const std::set<SampleId>& pool, std::span<const synthdata::Sample> dataset,
                                   std::uint64_t mc_seed) {
  const auto rep = cfg.strategy.representation();
  const auto fg = inference::foreground_classes(cfg.dataset.n_cl);
  selection::PoolFeatures features;
  for (const SampleId id : pool) {
    const synthdata::Sample& s = dataset[static_cast<std::size_t>(id)];
    features.ids.push_back(id);
    // Every pool sample sees the same n_i dropout masks, so scores compare
    // samples under one sampled ensemble (and duplicates score identically).
    const auto stack = inference::mc_inferences(params, s.image, cfg.n_i, mc_seed, cfg.hyper.dropout_rate, id);
    features.uncertainty.push_back(inference::uncertainty_score(stack, fg));
    if (rep == selection::Representation::kDescriptor) {
      features.descriptors.push_back(
          inference::image_descriptor(inference::abstraction_response(params, s.image), id).vec);
    } else if (rep == selection::Representation::kContent) {
      features.responses.push_back(inference::abstraction_response(params, s.image));
    }
  }
  return features;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

double RunConfig::resolved_lambda() const {
  switch (lambda_mode) {
    case LambdaMode::kPaperFormula:
      return micronet::default_lambda(n_ch, dataset.height, dataset.width);
    case LambdaMode::kExplicit:
      return lambda_value;
    case LambdaMode::kOff:
      return 0.0;
  }
  return 0.0;
}

void RunConfig::validate() const {
  try {
    dataset.validate();
  } catch (const InputError& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  require(n_initial >= 1, "split.n_initial must be >= 1");
  require(n_test >= 1, "split.n_test must be >= 1");
  require(n_initial + n_val + n_test <= dataset.n_samples,
          "split: n_initial + n_val + n_test exceeds dataset.n_samples");
  require(n_ch >= 1, "model.n_ch must be >= 1");
  require(n_i >= 2, "n_i must be >= 2");
  require(train_steps_per_stage >= 1, "train.steps_per_stage must be >= 1");
  require(lambda_mode != LambdaMode::kExplicit || (lambda_value >= 0.0 && std::isfinite(lambda_value)),
          "lambda.value must be finite and >= 0");
  micronet::Hyper h = hyper;
  h.lambda = resolved_lambda();
  h.validate();
  strategy.validate(h.lambda);
}

Tensor predict_labels(const Tensor& logits) {
  if (logits.rank() != 3) throw ShapeError("predict_labels: expected [C,H,W], got " + shape_string(logits.dims()));
  const std::size_t channels = logits.dim(0);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  Tensor out({logits.dim(1), logits.dim(2)});
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < channels; ++c) {
      if (logits[c * plane + p] > logits[best * plane + p]) best = c;
    }
    out[p] = static_cast<float>(best);
  }
  return out;
}

metrics::StepMetrics evaluate_label_maps(std::span<const Tensor> predictions, std::span<const Tensor* const> truths,
                                         std::size_t n_cl) {
  if (predictions.size() != truths.size()) throw ShapeError("evaluate: prediction and truth counts differ");
  if (predictions.empty()) throw InputError("evaluate: empty test set");
  if (n_cl < 2) throw InputError("evaluate: need at least two classes");
  metrics::StepMetrics m;
  m.dice.assign(n_cl, 0.0);
  m.msd.assign(n_cl, 0.0);
  std::vector<double> fg_dice, fg_msd;
  const auto n = static_cast<double>(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double sd = 0.0, sm = 0.0;
    for (std::size_t c = 0; c < n_cl; ++c) {
      const double d = metrics::dice(predictions[i], *truths[i], c);
      const double s = metrics::mean_surface_distance(predictions[i], *truths[i], c);
      m.dice[c] += d / n;
      m.msd[c] += s / n;
      if (c > 0) {
        sd += d;
        sm += s;
      }
    }
    fg_dice.push_back(sd / static_cast<double>(n_cl - 1));
    fg_msd.push_back(sm / static_cast<double>(n_cl - 1));
  }
  auto mean_std = [n](const std::vector<double>& v) {
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(ss / n)};
  };
  std::tie(m.dice_mean, m.dice_std) = mean_std(fg_dice);
  std::tie(m.msd_mean, m.msd_std) = mean_std(fg_msd);
  return m;
}

metrics::StepMetrics evaluate_model(const micronet::ModelParams& params,
                                    std::span<const synthdata::Sample* const> test_set) {
  std::vector<Tensor> predictions;
  std::vector<const Tensor*> truths;
  predictions.reserve(test_set.size());
  for (const synthdata::Sample* s : test_set) {
    const auto trace = micronet::forward(params, s->image, micronet::ForwardMode::deterministic());
    predictions.push_back(predict_labels(trace.logits));
    truths.push_back(&s->label);
  }
  return evaluate_label_maps(predictions, truths, params.n_cl);
}

RunRecord run_active_learning(const RunConfig& config, const StepObserver& observer) {
  config.validate();
  RunRecord record;
  record.config = config;
  record.lambda = config.resolved_lambda();
  micronet::Hyper hyper = config.hyper;
  hyper.lambda = record.lambda;

  const auto dataset = synthdata::generate_dataset(config.seed, config.dataset);
  synthdata::PoolState state =
      synthdata::initial_split(dataset, config.seed, config.n_initial, config.n_val, config.n_test);
  const auto test_set = samples_for(state.test, dataset);
  const double initial_pool = static_cast<double>(state.pool.size());

  auto finish_step = [&](std::size_t step, Clock::time_point started, StepRecord rec,
                         const micronet::ModelParams& params) {
    rec.metrics = evaluate_model(params, test_set);
    rec.metrics.step = step;
    rec.metrics.n_annotated = state.annotated.size();
    rec.metrics.pool_fraction =
        initial_pool > 0 ? static_cast<double>(state.annotated.size() - config.n_initial) / initial_pool : 0.0;
    rec.metrics.wall_time_s = std::chrono::duration<double>(Clock::now() - started).count();
    if (observer) observer(rec);
    record.steps.push_back(std::move(rec));
    record.stage_models.push_back(params);
  };

  auto started = Clock::now();
  micronet::ModelParams params = train_stage(config, hyper, 0, {}, state.annotated, dataset);
  finish_step(0, started, {}, params);

  for (std::size_t step = 1; step <= config.n_al_steps; ++step) {
    if (state.pool.empty()) {
      record.truncated = true;
      break;
    }
    started = Clock::now();
    StepRecord rec;
    const std::uint64_t mc_seed = derive_seed(config.seed, step, Stream::kMcDropout);
    const auto features = score_pool(config, params, state.pool, dataset, mc_seed);
    rec.batch = selection::query(config.strategy, features, record.lambda,
                                 derive_seed(config.seed, step, Stream::kQuery));
    rec.mc_seed = mc_seed;
    synthdata::oracle_annotate(state, dataset, rec.batch->ids);
    params = train_stage(config, hyper, step, std::move(params), state.annotated, dataset);
    finish_step(step, started, std::move(rec), params);
  }
  return record;
}

UpperBoundResult run_upper_bound(const RunConfig& config) {
  config.validate();
  micronet::Hyper hyper = config.hyper;
  hyper.lambda = config.resolved_lambda();
  const auto dataset = synthdata::generate_dataset(config.seed, config.dataset);
  synthdata::PoolState state =
      synthdata::initial_split(dataset, config.seed, config.n_initial, config.n_val, config.n_test);
  const auto started = Clock::now();
  const std::vector<SampleId> everything(state.pool.begin(), state.pool.end());
  synthdata::oracle_annotate(state, dataset, everything);
  UpperBoundResult result;
  result.params = train_stage(config, hyper, 0, {}, state.annotated, dataset);
  result.metrics = evaluate_model(result.params, samples_for(state.test, dataset));
  result.metrics.n_annotated = state.annotated.size();
  result.metrics.pool_fraction = 1.0;
  result.metrics.wall_time_s = std::chrono::duration<double>(Clock::now() - started).count();
  return result;
}

}  // namespace alseg::alloop
