#include <algorithm>
#include <vector>

#include "alseg/error.hpp"
#include "alseg/inference.hpp"
#include "alseg/micronet.hpp"
#include "alseg/rng.hpp"
#include "alseg/synthdata.hpp"
#include "doctest.h"

using namespace alseg;
namespace inf = alseg::inference;
namespace mn = alseg::micronet;

namespace {

const std::vector<synthdata::Sample>& toy_data() {
  static const auto data = synthdata::generate_dataset(21, {.n_samples = 6, .height = 16, .width = 16});
  return data;
}

const mn::ModelParams& toy_model() {
  static const mn::ModelParams model = [] {
    std::vector<mn::TrainingExample> set;
    for (const auto& s : toy_data()) set.push_back({&s.image, &s.label});
    mn::Hyper h;
    h.learning_rate = 5e-3;
    return mn::train(mn::init_params(3, 4, 3), set, h, 40, 8).params;
  }();
  return model;
}

inf::InferenceStack stack_from(std::size_t n_i, std::size_t n_cl, std::size_t h, std::size_t w,
                               std::vector<float> values) {
  return {0, Tensor({n_i, n_cl, h, w}, std::move(values))};
}

}  // namespace

TEST_CASE("mc_inferences: normalized slices, determinism, degenerate dropout") {
  const auto& img = toy_data()[0].image;
  const auto a = inf::mc_inferences(toy_model(), img, 5, 77, 0.5, 4);
  CHECK(a.sample_id == 4);
  CHECK(a.probs.dims() == std::vector<std::size_t>{5, 3, 16, 16});
  const std::size_t plane = 16 * 16;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t p = 0; p < plane; ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += a.probs[(i * 3 + c) * plane + p];
      CHECK(std::abs(s - 1.0) <= 1e-5);
    }
  }
  CHECK(bit_equal(a.probs, inf::mc_inferences(toy_model(), img, 5, 77, 0.5, 4).probs));

  const auto flat = inf::mc_inferences(toy_model(), img, 4, 77, 0.0);
  const std::size_t slice = 3 * plane;
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(std::equal(flat.probs.raw(), flat.probs.raw() + slice, flat.probs.raw() + i * slice));
  }
  CHECK(inf::uncertainty_score(flat, inf::foreground_classes(3)) == 0.0);

  CHECK_THROWS_AS(inf::mc_inferences(toy_model(), img, 1, 0, 0.5), InputError);
}

TEST_CASE("mc_inferences: nonzero variance for almost every seed") {
  const auto& img = toy_data()[1].image;
  const auto fg = inf::foreground_classes(3);
  int stochastic = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    if (inf::uncertainty_score(inf::mc_inferences(toy_model(), img, 17, seed * 1000, 0.5), fg) > 0.0) ++stochastic;
  }
  CHECK(stochastic >= 99);
}

TEST_CASE("uncertainty_score: worked examples and invariances") {
  SUBCASE("two passes, one foreground voxel at 0.2 and 0.8 -> population variance 0.09") {
    const auto s = stack_from(2, 2, 1, 1, {0.8f, 0.2f, 0.2f, 0.8f});
    const std::vector<std::size_t> fg{1};
    CHECK(inf::uncertainty_score(s, fg) == doctest::Approx(0.09).epsilon(1e-6));
  }
  SUBCASE("permuting slices and relabeling foreground order") {
    Rng r(5);
    const std::size_t n_i = 6, n_cl = 4, h = 2, w = 3;
    std::vector<float> v(n_i * n_cl * h * w);
    for (float& x : v) x = static_cast<float>(r.uniform());
    const auto s = stack_from(n_i, n_cl, h, w, v);
    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
    r.shuffle(std::span<std::size_t>(order));
    std::vector<float> permuted;
    const std::size_t slice = n_cl * h * w;
    for (const std::size_t i : order) permuted.insert(permuted.end(), v.begin() + i * slice, v.begin() + (i + 1) * slice);
    const auto sp = stack_from(n_i, n_cl, h, w, permuted);
    const auto fg = inf::foreground_classes(n_cl);
    const std::vector<std::size_t> fg_rev{3, 1, 2};
    const double base = inf::uncertainty_score(s, fg);
    CHECK(inf::uncertainty_score(sp, fg) == doctest::Approx(base).epsilon(1e-12));
    CHECK(inf::uncertainty_score(s, fg_rev) == doctest::Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);
    CHECK(base <= 0.25);
  }
  SUBCASE("bounded by 0.25 at the extreme") {
    const auto s = stack_from(2, 2, 1, 2, {1, 1, 0, 0, 0, 0, 1, 1});
    CHECK(inf::uncertainty_score(s, std::vector<std::size_t>{1}) == doctest::Approx(0.25));
  }
  SUBCASE("empty class set") {
    const auto s = stack_from(2, 2, 1, 1, {0.5f, 0.5f, 0.5f, 0.5f});
    CHECK_THROWS_AS(inf::uncertainty_score(s, std::vector<std::size_t>{}), InputError);
  }
  CHECK(inf::foreground_classes(3) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("abstraction_response: non-negative, deterministic, sensitive to training") {
  const auto& img = toy_data()[2].image;
  const Tensor r1 = inf::abstraction_response(toy_model(), img);
  CHECK(r1.dims() == std::vector<std::size_t>{8, 8, 8});
  for (const float x : r1.data()) CHECK(x >= 0.0f);
  CHECK(bit_equal(r1, inf::abstraction_response(toy_model(), img)));

  std::vector<mn::TrainingExample> set;
  for (const auto& s : toy_data()) set.push_back({&s.image, &s.label});
  mn::Hyper h;
  int changed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p0 = mn::init_params(500 + seed, 4, 3);
    const auto p1 = mn::train(p0, set, h, 1, seed).params;
    if (!bit_equal(inf::abstraction_response(p0, img), inf::abstraction_response(p1, img))) ++changed;
  }
  CHECK(changed >= 95);
}

TEST_CASE("image_descriptor: per-channel spatial means") {
  SUBCASE("channel c constant at c") {
    Tensor a({4, 3, 2});
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < 6; ++i) a[c * 6 + i] = static_cast<float>(c);
    }
    const auto d = inf::image_descriptor(a, 9);
    CHECK(d.sample_id == 9);
    CHECK(d.vec == std::vector<float>{0, 1, 2, 3});
  }
  SUBCASE("3x2x2 by hand") {
    const Tensor a({3, 2, 2}, {1, 2, 3, 4, 0, 0, 0, 8, 0.5f, 0.5f, 1.5f, 1.5f});
    const auto d = inf::image_descriptor(a);
    CHECK(d.vec[0] == doctest::Approx(2.5));
    CHECK(d.vec[1] == doctest::Approx(2.0));
    CHECK(d.vec[2] == doctest::Approx(1.0));
  }
  SUBCASE("spatial permutation invariance and linearity") {
    Rng r(8);
    Tensor a({5, 4, 4});
    for (float& x : a.data()) x = static_cast<float>(r.uniform(0, 3));
    Tensor perm = a;
    std::vector<std::size_t> order(16);
    for (std::size_t i = 0; i < 16; ++i) order[i] = i;
    r.shuffle(std::span<std::size_t>(order));
    for (std::size_t c = 0; c < 5; ++c) {
      for (std::size_t i = 0; i < 16; ++i) perm[c * 16 + i] = a[c * 16 + order[i]];
    }
    const auto d = inf::image_descriptor(a).vec;
    const auto dp = inf::image_descriptor(perm).vec;
    const auto ds = inf::image_descriptor(scale(a, 2.5f)).vec;
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(dp[c] == doctest::Approx(d[c]).epsilon(1e-6));
      CHECK(ds[c] == doctest::Approx(2.5 * d[c]).epsilon(1e-6));
    }
  }
}
