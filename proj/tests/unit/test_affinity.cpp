#include <cmath>
#include <vector>

#include "alseg/affinity.hpp"
#include "alseg/error.hpp"
#include "alseg/micronet.hpp"
#include "alseg/rng.hpp"
#include "doctest.h"

using namespace alseg;
namespace af = alseg::affinity;

namespace {

Tensor random_tensor(std::vector<std::size_t> dims, std::uint64_t seed, double lo = 0.0, double hi = 2.0) {
  Tensor t(std::move(dims));
  Rng r(seed);
  for (float& x : t.data()) x = static_cast<float>(r.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("cosine_similarity: worked examples and zero norms") {
  const std::vector<float> a{1, 2, 2}, b{2, 1, 2};
  CHECK(af::cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(af::cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{0, 1}) == 0.0);
  CHECK(af::cosine_similarity(a, b) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(af::cosine_similarity(std::vector<float>{0, 0, 0}, a) == 0.0);
  CHECK(af::cosine_similarity(std::vector<float>{1, -1}, std::vector<float>{-1, 1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(af::cosine_similarity(a, std::vector<float>{1, 2}), ShapeError);
}

TEST_CASE("content_distance: examples, loop oracle, symmetry and scaling") {
  const Tensor ones({3, 2, 5}, 1.0f), threes({3, 2, 5}, 3.0f);
  CHECK(af::content_distance(ones, ones) == 0.0);
  CHECK(af::content_distance(ones, threes) == doctest::Approx(4.0));

  const Tensor a = random_tensor({2, 2, 2}, 1), b = random_tensor({2, 2, 2}, 2);
  double loop = 0.0;
  for (std::size_t i = 0; i < 8; ++i) loop += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  loop /= 8.0;
  CHECK(std::abs(af::content_distance(a, b) - loop) <= 1e-6);
  CHECK(af::content_distance(a, b) == af::content_distance(b, a));
  CHECK(af::content_distance(scale(a, 3.0f), scale(b, 3.0f)) == doctest::Approx(9.0 * loop).epsilon(1e-5));
  CHECK_THROWS_AS(af::content_distance(a, ones), ShapeError);
}

TEST_CASE("distance_to_similarity") {
  CHECK(af::distance_to_similarity(0.0) == 1.0);
  CHECK(af::distance_to_similarity(1.0) == 0.5);
  Rng r(4);
  for (int i = 0; i < 200; ++i) {
    double d1 = r.uniform(0, 10), d2 = r.uniform(0, 10);
    if (d1 == d2) continue;
    if (d1 > d2) std::swap(d1, d2);
    CHECK(af::distance_to_similarity(d1) > af::distance_to_similarity(d2));
  }
  CHECK_THROWS_AS(af::distance_to_similarity(-0.1), InputError);
}

TEST_CASE("channel_entropy_map: uniform, one-hot, consistency with the entropy loss") {
  const Tensor uniform({6, 3, 3}, 0.4f);
  const Tensor uniform_map = af::channel_entropy_map(uniform);
  for (const float x : uniform_map.data()) CHECK(x == doctest::Approx(std::log(6.0)).epsilon(1e-6));

  Tensor onehot({6, 3, 3}, 0.0f);
  for (std::size_t i = 0; i < 9; ++i) onehot[(i % 6) * 9 + i] = 2.0f;
  const Tensor onehot_map = af::channel_entropy_map(onehot);
  for (const float x : onehot_map.data()) CHECK(std::abs(x) <= 1e-4);

  const Tensor a = random_tensor({5, 4, 3}, 12);
  const Tensor map = af::channel_entropy_map(a);
  CHECK(map.dims() == std::vector<std::size_t>{4, 3});
  double sum = 0.0;
  for (const float x : map.data()) sum += x;
  CHECK(std::abs(-sum - micronet::entropy_loss(a)) <= 1e-6);

  CHECK_THROWS_AS(af::channel_entropy_map(Tensor({2, 1, 1}, {1.0f, -1.0f})), InputError);
}

TEST_CASE("affinity matrices: ranges, self-similarity maximum, determinism") {
  Rng r(31);
  const std::vector<SampleId> ids{4, 9, 2, 7, 11};
  std::vector<std::vector<float>> vecs;
  std::vector<Tensor> resp;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<float> v(6);
    for (float& x : v) x = static_cast<float>(r.uniform(0, 1));
    vecs.push_back(v);
    resp.push_back(random_tensor({3, 4, 4}, 100 + i));
  }
  std::vector<const std::vector<float>*> vp;
  std::vector<const Tensor*> rp;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    vp.push_back(&vecs[i]);
    rp.push_back(&resp[i]);
  }
  const std::vector<SampleId> rows{9, 7};
  const std::vector<const std::vector<float>*> row_v{vp[1], vp[3]};
  const std::vector<const Tensor*> row_r{rp[1], rp[3]};

  for (const auto& m : {af::cosine_affinity(rows, row_v, ids, vp), af::content_affinity(rows, row_r, ids, rp)}) {
    CHECK(m.rows == rows);
    CHECK(m.cols == ids);
    REQUIRE(m.values.size() == 2 * ids.size());
    for (const double v : m.values) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    // Row 0 is sample 9 (col 1); row 1 is sample 7 (col 3).
    for (std::size_t c = 0; c < ids.size(); ++c) {
      CHECK(m(0, 1) >= m(0, c));
      CHECK(m(1, 3) >= m(1, c));
    }
  }
  CHECK(af::cosine_affinity(rows, row_v, ids, vp).values == af::cosine_affinity(rows, row_v, ids, vp).values);

  // Swapping the column order permutes the columns and nothing else.
  const std::vector<SampleId> ids_rev(ids.rbegin(), ids.rend());
  const std::vector<const Tensor*> rp_rev(rp.rbegin(), rp.rend());
  const auto fwd = af::content_affinity(rows, row_r, ids, rp);
  const auto rev = af::content_affinity(rows, row_r, ids_rev, rp_rev);
  for (std::size_t r0 = 0; r0 < 2; ++r0) {
    for (std::size_t c = 0; c < ids.size(); ++c) CHECK(fwd(r0, c) == rev(r0, ids.size() - 1 - c));
  }
}
