#include "alseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "alseg/error.hpp"

namespace alseg::metrics {
namespace {

void require_same_dims(const Tensor& pred, const Tensor& truth, const char* op) {
  if (!pred.same_shape(truth) || pred.rank() != 2) {
    throw ShapeError(std::string(op) + ": masks " + shape_string(pred.dims()) + " and " +
                     shape_string(truth.dims()) + " must be equal [H,W]");
  }
}

std::vector<std::pair<int, int>> boundary(const Tensor& labels, float cls) {
  const int h = static_cast<int>(labels.dim(0));
  const int w = static_cast<int>(labels.dim(1));
  auto inside = [&](int y, int x) {
    return y >= 0 && y < h && x >= 0 && x < w && labels.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) == cls;
  };
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!inside(y, x)) continue;
      if (!inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1)) out.emplace_back(y, x);
    }
  }
  return out;
}

double mean_nearest(const std::vector<std::pair<int, int>>& from, const std::vector<std::pair<int, int>>& to) {
  double total = 0.0;
  for (const auto& [fy, fx] : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [ty, tx] : to) {
      const double dy = fy - ty;
      const double dx = fx - tx;
      best = std::min(best, dy * dy + dx * dx);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.size());
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double dice(const Tensor& pred, const Tensor& truth, std::size_t cls) {
  require_same_dims(pred, truth, "dice");
  const auto c = static_cast<float>(cls);
  std::size_t p = 0, t = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool in_p = pred[i] == c;
    const bool in_t = truth[i] == c;
    p += in_p;
    t += in_t;
    both += in_p && in_t;
  }
  if (p + t == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + t);
}

double mean_surface_distance(const Tensor& pred, const Tensor& truth, std::size_t cls) {
  require_same_dims(pred, truth, "mean_surface_distance");
  const auto c = static_cast<float>(cls);
  const auto bp = boundary(pred, c);
  const auto bt = boundary(truth, c);
  if (bp.empty() && bt.empty()) return 0.0;
  if (bp.empty() || bt.empty()) {
    const auto h = static_cast<double>(pred.dim(0));
    const auto w = static_cast<double>(pred.dim(1));
    return std::sqrt(h * h + w * w);
  }
  return 0.5 * (mean_nearest(bp, bt) + mean_nearest(bt, bp));
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InputError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  // Use the symmetry relation where the continued fraction converges fastest.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_upper_tail(double t, double df) {
  if (!(df > 0.0)) throw InputError("student_t_upper_tail: df must be positive");
  if (std::isnan(t)) throw InputError("student_t_upper_tail: t is NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  const double two_sided = incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t >= 0.0 ? 0.5 * two_sided : 1.0 - 0.5 * two_sided;
}

TTestResult paired_t_test_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("paired_t_test_one_sided: samples differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw InputError("paired_t_test_one_sided: need at least 2 pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw InputError("paired_t_test_one_sided: differences have zero variance");
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  return {t, student_t_upper_tail(t, static_cast<double>(n - 1))};
}

}  // namespace alseg::metrics
