#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "alseg/tensor.hpp"

namespace alseg::metrics {

// Evaluation of one model on the test set.
struct StepMetrics {
  std::size_t step = 0;
  double pool_fraction = 0.0;        // share of the initial pool annotated so far
  std::size_t n_annotated = 0;
  std::vector<double> dice;          // per class, index 0 = background
  double dice_mean = 0.0;            // mean foreground Dice over test samples
  double dice_std = 0.0;             // std over test samples of per-sample foreground Dice
  std::vector<double> msd;           // per class, pixels
  double msd_mean = 0.0;
  double msd_std = 0.0;
  double wall_time_s = 0.0;
};

// 2|P and T| / (|P| + |T|) for class `cls`; 1 when both masks are empty.
double dice(const Tensor& pred, const Tensor& truth, std::size_t cls);

// Symmetric mean distance between the 4-connected boundaries of the class
// masks, in pixels. 0 when both are empty, the image diagonal when exactly one
// is.
double mean_surface_distance(const Tensor& pred, const Tensor& truth, std::size_t cls);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;  // P(T >= t) under H0, df = n - 1
};

// One-sided paired t-test for mean(a) > mean(b). Throws InputError for n < 2
// or when all differences are identical (zero variance).
TTestResult paired_t_test_one_sided(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(T >= t) for Student's t with `df` degrees of freedom.
double student_t_upper_tail(double t, double df);

}  // namespace alseg::metrics
