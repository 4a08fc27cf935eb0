#include <algorithm>
#include <cmath>
#include <vector>

#include "alseg/micronet.hpp"
#include "alseg/rng.hpp"
#include "doctest.h"
#include "oracles/gradient_check.hpp"

using namespace alseg;
using namespace alseg::micronet;

namespace {

struct Fixture {
  std::vector<Tensor> images, labels;
  std::vector<TrainingExample> batch;
};

Fixture make_batch(std::uint64_t seed, std::size_t n, std::size_t side, std::size_t n_cl) {
  Fixture f;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img({1, side, side});
    for (float& v : img.data()) v = static_cast<float>(rng.uniform());
    Tensor lab({side, side});
    for (float& v : lab.data()) v = static_cast<float>(rng.below(n_cl));
    f.images.push_back(std::move(img));
    f.labels.push_back(std::move(lab));
  }
  for (std::size_t i = 0; i < n; ++i) f.batch.push_back({&f.images[i], &f.labels[i]});
  return f;
}

}  // namespace

TEST_CASE("analytic gradients match central differences without the entropy term") {
  const ModelParams params = init_params(3, 4, 3);
  const Fixture f = make_batch(11, 2, 8, 3);
  Hyper hyper;
  hyper.lambda = 0.0;
  const oracle::GradientReport r = oracle::check_gradients(params, f.batch, hyper, 99);
  INFO("checked " << r.checked << ", kink crossings " << r.kink_crossings << ", worst " << r.worst);
  CHECK(r.probed == params.parameter_count());
  CHECK(r.checked > r.probed / 2);
  CHECK(r.failed == 0);
  CHECK(r.unresolved == 0);
}

TEST_CASE("analytic gradients match central differences with the entropy term") {
  const ModelParams params = init_params(5, 4, 3);
  const Fixture f = make_batch(12, 2, 8, 3);
  Hyper hyper;
  hyper.lambda = default_lambda(4, 8, 8);
  const oracle::GradientReport r = oracle::check_gradients(params, f.batch, hyper, 7);
  INFO("checked " << r.checked << ", kink crossings " << r.kink_crossings << ", worst " << r.worst);
  CHECK(r.probed == params.parameter_count());
  CHECK(r.checked > r.probed / 2);
  CHECK(r.failed == 0);
  CHECK(r.unresolved == 0);
}

TEST_CASE("a stencil straddling a ReLU kink is detected and resolved with a smaller step") {
  const ModelParams params = init_params(3, 4, 3);
  const Fixture f = make_batch(11, 2, 8, 3);
  Hyper hyper;
  const oracle::GradientReport r = oracle::check_gradients(params, f.batch, hyper, 99);
  // This fixture is known to straddle kinks at h = 1e-3; without the
  // re-probe those components disagree by a few percent.
  CHECK(r.kink_crossings > 0);
  CHECK(r.failed == 0);
}

TEST_CASE("a corrupted gradient is caught") {
  // Sanity check of the checker itself: scaling the oracle's learning signal
  // by perturbing lambda must produce failures.
  const ModelParams params = init_params(5, 4, 3);
  const Fixture f = make_batch(12, 2, 8, 3);
  Hyper analytic;
  analytic.lambda = 0.0;
  const LossAndGrad lg = total_loss_and_grad(params, f.batch, analytic, 7);
  std::vector<oracle::Example> ex;
  for (std::size_t b = 0; b < f.batch.size(); ++b) {
    ex.push_back({f.batch[b].image, f.batch[b].label,
                  spatial_dropout_mask(batch_item_seed(7, b), params.abstraction_channels(), analytic.dropout_rate)});
  }
  oracle::Net net = oracle::to_double(params);
  // Gradient of conv5 bias 0 compared against a loss that includes a large
  // entropy term on a different layer must still agree (bias 0 of the logits
  // layer does not affect the abstraction layer), while conv1 weights must not.
  const oracle::Difference logit_bias = oracle::central_difference(net, net[4].b[0], 1e-6, ex, 1.0);
  CHECK(std::abs(logit_bias.value - lg.grads[4].bias[0]) < 1e-4);
  std::size_t disagree = 0;
  for (std::size_t i = 0; i < net[0].w.size(); ++i) {
    const oracle::Difference d = oracle::central_difference(net, net[0].w[i], 1e-6, ex, 1.0);
    if (std::abs(d.value - lg.grads[0].weight[i]) > 1e-3 * std::max(1.0, std::abs(d.value))) ++disagree;
  }
  CHECK(disagree > 0);
}
