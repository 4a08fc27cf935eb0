#include <cmath>
#include <vector>

#include "alseg/error.hpp"
#include "alseg/metrics.hpp"
#include "alseg/rng.hpp"
#include "doctest.h"

#ifdef ALSEG_HAVE_BOOST_MATH
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#endif

using namespace alseg;
namespace mt = alseg::metrics;

namespace {

Tensor mask_from(std::size_t h, std::size_t w, std::initializer_list<std::pair<std::size_t, std::size_t>> on,
                 float cls = 1.0f) {
  Tensor t({h, w}, 0.0f);
  for (const auto& [y, x] : on) t.at(y, x) = cls;
  return t;
}

Tensor random_labels(std::size_t h, std::size_t w, std::size_t n_cl, Rng& r) {
  Tensor t({h, w});
  for (float& x : t.data()) x = static_cast<float>(r.below(n_cl));
  return t;
}

}  // namespace

TEST_CASE("dice: worked examples") {
  const Tensor a = mask_from(4, 4, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  CHECK(mt::dice(a, a, 1) == 1.0);
  const Tensor b = mask_from(4, 4, {{2, 2}, {3, 3}});
  CHECK(mt::dice(a, b, 1) == 0.0);
  const Tensor c = mask_from(4, 4, {{0, 0}, {0, 1}, {3, 2}, {3, 3}});
  CHECK(mt::dice(a, c, 1) == doctest::Approx(0.5));
  const Tensor empty({4, 4}, 0.0f);
  CHECK(mt::dice(empty, empty, 1) == 1.0);
  CHECK(mt::dice(a, empty, 1) == 0.0);
  CHECK_THROWS_AS(mt::dice(a, Tensor({4, 5}), 1), ShapeError);
}

TEST_CASE("dice: symmetric and permutation invariant") {
  Rng r(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor p = random_labels(6, 5, 3, r), t = random_labels(6, 5, 3, r);
    std::vector<std::size_t> order(30);
    for (std::size_t i = 0; i < 30; ++i) order[i] = i;
    r.shuffle(std::span<std::size_t>(order));
    Tensor pp({6, 5}), tp({6, 5});
    for (std::size_t i = 0; i < 30; ++i) {
      pp[i] = p[order[i]];
      tp[i] = t[order[i]];
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = mt::dice(p, t, c);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
      CHECK(d == mt::dice(t, p, c));
      CHECK(d == doctest::Approx(mt::dice(pp, tp, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mean_surface_distance: worked examples and properties") {
  const Tensor empty({32, 32}, 0.0f);
  const Tensor blob = mask_from(32, 32, {{4, 4}, {4, 5}, {5, 4}, {5, 5}});
  CHECK(mt::mean_surface_distance(blob, blob, 1) == 0.0);
  CHECK(mt::mean_surface_distance(empty, empty, 1) == 0.0);
  CHECK(mt::mean_surface_distance(blob, empty, 1) == doctest::Approx(std::sqrt(2048.0)));
  CHECK(mt::mean_surface_distance(empty, blob, 1) == doctest::Approx(45.2548).epsilon(1e-5));

  // Single pixels at (y=0,x=0) and (y=3,x=4): distance 5 each way.
  const Tensor p = mask_from(8, 8, {{0, 0}});
  const Tensor t = mask_from(8, 8, {{3, 4}});
  CHECK(mt::mean_surface_distance(p, t, 1) == doctest::Approx(5.0));

  // A filled 3x3 square only exposes its ring; interior pixel is not boundary.
  const Tensor square = mask_from(8, 8, {{2, 2}, {2, 3}, {2, 4}, {3, 2}, {3, 3}, {3, 4}, {4, 2}, {4, 3}, {4, 4}});
  const Tensor centre = mask_from(8, 8, {{3, 3}});
  // centre -> nearest ring pixel distance 1; ring -> centre: 4 at 1, 4 at sqrt(2).
  const double expected = 0.5 * (1.0 + (4.0 + 4.0 * std::sqrt(2.0)) / 8.0);
  CHECK(mt::mean_surface_distance(centre, square, 1) == doctest::Approx(expected));

  Rng r(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor a = random_labels(7, 9, 3, r), b = random_labels(7, 9, 3, r);
    CHECK(mt::mean_surface_distance(a, b, 2) == doctest::Approx(mt::mean_surface_distance(b, a, 2)));
    CHECK(mt::mean_surface_distance(a, b, 2) >= 0.0);
    CHECK(mt::mean_surface_distance(a, a, 2) == 0.0);
  }
  CHECK_THROWS_AS(mt::mean_surface_distance(blob, Tensor({32, 31}), 1), ShapeError);
}

TEST_CASE("paired t-test: worked examples and degenerate inputs") {
  SUBCASE("d = (1, 2, 3)") {
    const std::vector<double> a{1, 2, 3}, b{0, 0, 0};
    const auto r = mt::paired_t_test_one_sided(a, b);
    CHECK(r.t == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    // Student t with 2 df has the closed-form CDF F(t) = 1/2 + t / (2 sqrt(2 + t^2)).
    const double closed = 0.5 - r.t / (2.0 * std::sqrt(2.0 + r.t * r.t));
    CHECK(r.p == doctest::Approx(closed).epsilon(1e-10));
    CHECK(r.p == doctest::Approx(0.0371).epsilon(1e-3));
  }
  SUBCASE("symmetric differences give t = 0, p = 0.5") {
    const auto r = mt::paired_t_test_one_sided(std::vector<double>{0, 2}, std::vector<double>{1, 1});
    CHECK(r.t == 0.0);
    CHECK(r.p == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("zero variance, too few pairs and length mismatch are rejected") {
    CHECK_THROWS_AS(mt::paired_t_test_one_sided(std::vector<double>{2, 2, 2, 2}, std::vector<double>{1, 1, 1, 1}),
                    InputError);
    CHECK_THROWS_AS(mt::paired_t_test_one_sided(std::vector<double>{1}, std::vector<double>{0}), InputError);
    CHECK_THROWS_AS(mt::paired_t_test_one_sided(std::vector<double>{1, 2}, std::vector<double>{0}), ShapeError);
  }
  SUBCASE("antisymmetry: swapping arguments negates t and complements p") {
    Rng r(6);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + r.below(12);
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = r.normal();
        b[i] = r.normal();
      }
      const auto ab = mt::paired_t_test_one_sided(a, b);
      const auto ba = mt::paired_t_test_one_sided(b, a);
      CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
      CHECK(std::abs(ab.p + ba.p - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("Student t tail: closed forms at df 1 and 2") {
  for (const double t : {-5.0, -1.3, -0.2, 0.0, 0.4, 1.0, 2.5, 9.0, 40.0}) {
    // df = 1 is Cauchy: P(T >= t) = 1/2 - atan(t)/pi.
    CHECK(mt::student_t_upper_tail(t, 1.0) == doctest::Approx(0.5 - std::atan(t) / M_PI).epsilon(1e-10));
    CHECK(mt::student_t_upper_tail(t, 2.0) ==
          doctest::Approx(0.5 - t / (2.0 * std::sqrt(2.0 + t * t))).epsilon(1e-10));
  }
  CHECK(mt::incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(mt::incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  // I_x(1, b) = 1 - (1 - x)^b.
  CHECK(mt::incomplete_beta(1.0, 4.0, 0.3) == doctest::Approx(1.0 - std::pow(0.7, 4.0)).epsilon(1e-12));
}

#ifdef ALSEG_HAVE_BOOST_MATH
TEST_CASE("Student t tail and incomplete beta agree with Boost.Math") {
  Rng r(19);
  for (int trial = 0; trial < 300; ++trial) {
    const double df = 1.0 + static_cast<double>(r.below(40));
    const double t = r.uniform(-8, 8);
    const boost::math::students_t dist(df);
    const double expected = boost::math::cdf(boost::math::complement(dist, t));
    CHECK(mt::student_t_upper_tail(t, df) == doctest::Approx(expected).epsilon(1e-9).scale(1e-300));

    const double a = r.uniform(0.1, 20), b = r.uniform(0.1, 20), x = r.uniform();
    CHECK(mt::incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-9));
  }
}
#endif
