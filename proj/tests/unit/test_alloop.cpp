#include <algorithm>
#include <cmath>
#include <vector>

#include "alseg/alloop.hpp"
#include "alseg/error.hpp"
#include "alseg/rng.hpp"
#include "doctest.h"

using namespace alseg;
namespace al = alseg::alloop;
namespace sel = alseg::selection;
namespace mn = alseg::micronet;

namespace {

al::RunConfig small_config(sel::Variant v = sel::Variant::kUnc) {
  al::RunConfig c;
  c.seed = 3;
  c.dataset.n_samples = 60;
  c.dataset.height = 16;
  c.dataset.width = 16;
  c.n_initial = 6;
  c.n_val = 4;
  c.n_test = 10;
  c.n_ch = 4;
  c.strategy = {v, 8, 4};
  c.n_i = 3;
  c.n_al_steps = 2;
  c.train_steps_per_stage = 15;
  c.hyper.batch_size = 4;
  c.lambda_mode = c.strategy.requires_entropy() ? al::LambdaMode::kPaperFormula : al::LambdaMode::kOff;
  return c;
}

bool same_metrics(const metrics::StepMetrics& a, const metrics::StepMetrics& b) {
  return a.step == b.step && a.pool_fraction == b.pool_fraction && a.n_annotated == b.n_annotated &&
         a.dice == b.dice && a.dice_mean == b.dice_mean && a.dice_std == b.dice_std && a.msd == b.msd &&
         a.msd_mean == b.msd_mean && a.msd_std == b.msd_std;
}

bool same_model(const mn::ModelParams& a, const mn::ModelParams& b) {
  for (std::size_t l = 0; l < mn::kLayerCount; ++l) {
    if (!bit_equal(a.layers[l].weight, b.layers[l].weight) || !bit_equal(a.layers[l].bias, b.layers[l].bias)) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("run_active_learning: zero AL steps gives one row") {
  auto c = small_config();
  c.n_al_steps = 0;
  const auto rec = al::run_active_learning(c);
  REQUIRE(rec.steps.size() == 1);
  CHECK(rec.steps[0].metrics.step == 0);
  CHECK(rec.steps[0].metrics.n_annotated == 6);
  CHECK(rec.steps[0].metrics.pool_fraction == 0.0);
  CHECK_FALSE(rec.steps[0].batch.has_value());
  CHECK_FALSE(rec.truncated);
  CHECK(rec.stage_models.size() == 1);
}

TEST_CASE("run_active_learning: deterministic and bookkept") {
  const auto c = small_config(sel::Variant::kUncPlusEcd);
  std::vector<std::size_t> observed;
  const auto a = al::run_active_learning(c, [&](const al::StepRecord& r) { observed.push_back(r.metrics.step); });
  const auto b = al::run_active_learning(c);
  CHECK(observed == std::vector<std::size_t>{0, 1, 2});
  REQUIRE(a.steps.size() == 3);
  REQUIRE(b.steps.size() == 3);
  CHECK(a.lambda == mn::default_lambda(4, 16, 16));
  const double initial_pool = 60 - 6 - 4 - 10;
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(same_metrics(a.steps[s].metrics, b.steps[s].metrics));
    CHECK(same_model(a.stage_models[s], b.stage_models[s]));
    CHECK(a.steps[s].metrics.n_annotated == 6 + 4 * s);
    CHECK(a.steps[s].metrics.pool_fraction == doctest::Approx(4.0 * static_cast<double>(s) / initial_pool));
    const auto& m = a.steps[s].metrics;
    CHECK(m.dice_mean >= 0.0);
    CHECK(m.dice_mean <= 1.0);
    CHECK(m.msd_mean >= 0.0);
    CHECK(m.dice.size() == 3);
    if (s > 0) {
      REQUIRE(a.steps[s].batch.has_value());
      CHECK(a.steps[s].batch->ids == b.steps[s].batch->ids);
      CHECK(a.steps[s].batch->ids.size() == 4);
      CHECK(a.steps[s].mc_seed == b.steps[s].mc_seed);
      CHECK(a.steps[s].mc_seed == derive_seed(c.seed, s, Stream::kMcDropout));
    }
  }
  // Batches never repeat a sample.
  std::vector<SampleId> all(a.steps[1].batch->ids);
  all.insert(all.end(), a.steps[2].batch->ids.begin(), a.steps[2].batch->ids.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("run_active_learning: the strategy does not perturb the initial model") {
  const auto unc = al::run_active_learning(small_config(sel::Variant::kUnc));
  const auto rnd = al::run_active_learning(small_config(sel::Variant::kRand));
  CHECK(same_model(unc.stage_models[0], rnd.stage_models[0]));
  CHECK(same_metrics(unc.steps[0].metrics, rnd.steps[0].metrics));
}

TEST_CASE("run_active_learning: every strategy completes") {
  for (const auto v : sel::all_variants()) {
    auto c = small_config(v);
    c.n_al_steps = 1;
    const auto rec = al::run_active_learning(c);
    REQUIRE(rec.steps.size() == 2);
    CHECK(rec.steps[1].batch->variant == v);
    CHECK(rec.steps[1].metrics.n_annotated == 10);
  }
}

TEST_CASE("run_active_learning: continue mode trains from the previous stage") {
  auto c = small_config();
  c.retrain_mode = al::RetrainMode::kContinue;
  const auto rec = al::run_active_learning(c);
  CHECK(rec.stage_models[1].adam.t == 2 * static_cast<std::int64_t>(c.train_steps_per_stage));
  c.retrain_mode = al::RetrainMode::kFromScratch;
  CHECK(al::run_active_learning(c).stage_models[1].adam.t == static_cast<std::int64_t>(c.train_steps_per_stage));
}

TEST_CASE("run_active_learning: truncates when the pool runs dry") {
  auto c = small_config();
  c.dataset.n_samples = 26;
  c.n_initial = 4;
  c.n_val = 2;
  c.n_test = 15;  // pool of 5
  c.strategy.n_rep = 3;
  c.n_al_steps = 4;
  const auto rec = al::run_active_learning(c);
  CHECK(rec.truncated);
  REQUIRE(rec.steps.size() == 3);
  CHECK(rec.steps[1].metrics.n_annotated == 7);
  CHECK(rec.steps[2].metrics.n_annotated == 9);
  CHECK(rec.steps[2].batch->ids.size() == 2);
  CHECK(rec.steps[2].metrics.pool_fraction == doctest::Approx(1.0));
}

TEST_CASE("RunConfig validation") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  c.n_initial = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.n_test = 60;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.n_i = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(sel::Variant::kUncMinusEcd);
  c.lambda_mode = al::LambdaMode::kOff;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(sel::Variant::kUncMinusId);
  c.lambda_mode = al::LambdaMode::kExplicit;
  c.lambda_value = 1e-3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.dataset.height = 15;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(al::run_active_learning(c), ConfigError);
}

TEST_CASE("evaluation: injected one-hot logits score perfectly") {
  const auto data = synthdata::generate_dataset(5, {.n_samples = 8, .height = 16, .width = 16});
  std::vector<Tensor> preds;
  std::vector<const Tensor*> truths;
  for (const auto& s : data) {
    Tensor logits({3, 16, 16}, 0.0f);
    for (std::size_t p = 0; p < 256; ++p) logits[static_cast<std::size_t>(s.label[p]) * 256 + p] = 1.0f;
    preds.push_back(al::predict_labels(logits));
    CHECK(preds.back() == s.label);
    truths.push_back(&s.label);
  }
  const auto m = al::evaluate_label_maps(preds, truths, 3);
  CHECK(m.dice_mean == 1.0);
  CHECK(m.dice_std == 0.0);
  CHECK(m.msd_mean == 0.0);
  CHECK(m.dice == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("evaluation: untrained models and test-set order") {
  const auto data = synthdata::generate_dataset(6, {.n_samples = 20, .height = 16, .width = 16});
  std::vector<const synthdata::Sample*> test;
  for (const auto& s : data) test.push_back(&s);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = al::evaluate_model(mn::init_params(seed, 4, 3), test);
    CHECK(m.dice_mean < 0.5);
    total += m.dice_mean;
  }
  MESSAGE("untrained mean foreground Dice over 10 seeds: " << total / 10.0);

  const auto p = mn::init_params(1, 4, 3);
  const auto forward = al::evaluate_model(p, test);
  std::vector<const synthdata::Sample*> shuffled = test;
  Rng r(3);
  r.shuffle(std::span<const synthdata::Sample*>(shuffled));
  const auto back = al::evaluate_model(p, shuffled);
  CHECK(back.dice_mean == doctest::Approx(forward.dice_mean).epsilon(1e-12));
  CHECK(back.msd_mean == doctest::Approx(forward.msd_mean).epsilon(1e-12));
  CHECK(back.dice_std == doctest::Approx(forward.dice_std).epsilon(1e-12));
  CHECK_THROWS_AS(al::evaluate_model(p, {}), InputError);
}

TEST_CASE("run_upper_bound: annotates the whole pool") {
  const auto c = small_config();
  const auto ub = al::run_upper_bound(c);
  CHECK(ub.metrics.n_annotated == 60 - 4 - 10);
  CHECK(ub.metrics.pool_fraction == 1.0);
  CHECK(ub.params.adam.t == static_cast<std::int64_t>(c.train_steps_per_stage));
  const auto again = al::run_upper_bound(c);
  CHECK(same_metrics(ub.metrics, again.metrics));
}
