#pragma once

// Finite-difference check of micronet::total_loss_and_grad against the
// double-precision oracle in naive_net.hpp.
//
// Every parameter is probed with a central difference at step h. A component
// counts when |analytic| or |numeric| exceeds 1e-6 and passes when the
// relative error |a - n| / max(|a|, |n|) is below the tolerance. ReLU makes
// the loss piecewise smooth: if a stencil straddles a kink (some unit changes
// state between -h and +h) the difference quotient measures a different
// piece, so that component is re-probed with a step small enough not to
// cross. The entropy term is smooth but very stiff where an abstraction unit
// sits just above zero (ln(a + 1e-8)); there the quotient at h is dominated by
// truncation error. A stencil whose quotient at h disagrees with the one at
// h/10 is likewise re-probed with smaller steps until two consecutive
// quotients agree. Both kinds of re-probe are counted separately so reports
// show how many there were.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "alseg/micronet.hpp"
#include "oracles/naive_net.hpp"

namespace oracle {

struct GradientReport {
  std::size_t probed = 0;
  std::size_t checked = 0;         // components above the magnitude floor
  std::size_t failed = 0;
  std::size_t kink_crossings = 0;  // stencils at h that straddled a kink
  std::size_t stiff = 0;           // smooth stencils where h was outside the asymptotic regime
  std::size_t at_kink = 0;         // parameters exactly on a kink, checked one-sidedly
  std::size_t unresolved = 0;      // no kink-free stencil found on either side (not checked)
  double worst = 0.0;              // worst relative error among checked components
};

// Second-order one-sided difference over [0, 2h] (h > 0) or [2h, 0] (h < 0);
// NaN when that interval itself straddles a kink.
inline double one_sided(Net& net, double& slot, double h, std::span<const Example> batch, double lambda) {
  const double saved = slot;
  std::vector<char> near, far;
  const double l0 = total_loss(net, batch, lambda);
  slot = saved + h;
  const double l1 = total_loss(net, batch, lambda, &near);
  slot = saved + 2 * h;
  const double l2 = total_loss(net, batch, lambda, &far);
  slot = saved;
  if (near != far) return std::numeric_limits<double>::quiet_NaN();
  return (-3 * l0 + 4 * l1 - l2) / (2 * h);
}

inline GradientReport check_gradients(const alseg::micronet::ModelParams& params,
                                      std::span<const alseg::micronet::TrainingExample> batch,
                                      const alseg::micronet::Hyper& hyper, std::uint64_t seed, double h = 1e-3,
                                      double tolerance = 1e-3) {
  using namespace alseg::micronet;
  const LossAndGrad lg = total_loss_and_grad(params, batch, hyper, seed);
  std::vector<Example> ex;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ex.push_back({batch[b].image, batch[b].label,
                  spatial_dropout_mask(batch_item_seed(seed, b), params.abstraction_channels(), hyper.dropout_rate)});
  }
  Net net = to_double(params);
  GradientReport r;
  auto probe = [&](double& slot, double analytic) {
    ++r.probed;
    double step = h;
    Difference d = central_difference(net, slot, step, ex, hyper.lambda);
    if (d.crosses_kink) {
      ++r.kink_crossings;
      while (d.crosses_kink && step * 1e-2 >= 1e-9) {
        step *= 1e-2;
        d = central_difference(net, slot, step, ex, hyper.lambda);
      }
      if (d.crosses_kink) {
        // The parameter sits exactly on a kink (typically a zero bias feeding a
        // unit whose inputs are all zero). The loss has only one-sided
        // derivatives there; the analytic ReLU'(0) = 0 convention must
        // reproduce one of them.
        ++r.at_kink;
        const double left = one_sided(net, slot, -1e-6, ex, hyper.lambda);
        const double right = one_sided(net, slot, 1e-6, ex, hyper.lambda);
        if (std::isnan(left) && std::isnan(right)) {
          ++r.unresolved;
          return;
        }
        d.value = std::abs(analytic - left) <= std::abs(analytic - right) || std::isnan(right) ? left : right;
        d.crosses_kink = false;
        step = 0.0;
      }
    }
    // Converge the quotient: compare with a ten times smaller step.
    for (bool counted = false; step >= 1e-8; step *= 0.1) {  // skipped for one-sided values
      const Difference finer = central_difference(net, slot, step * 0.1, ex, hyper.lambda);
      if (finer.crosses_kink) break;
      const double agree_scale = std::max({std::abs(d.value), std::abs(finer.value), 1e-6});
      if (std::abs(finer.value - d.value) < 0.1 * tolerance * agree_scale) break;
      if (!counted) ++r.stiff;
      counted = true;
      d = finer;
    }
    const double numeric = d.value;
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale <= 1e-6) return;
    const double rel = std::abs(analytic - numeric) / scale;
    ++r.checked;
    r.worst = std::max(r.worst, rel);
    if (!(rel < tolerance)) ++r.failed;
  };
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (std::size_t i = 0; i < net[l].w.size(); ++i) probe(net[l].w[i], lg.grads[l].weight[i]);
    for (std::size_t i = 0; i < net[l].b.size(); ++i) probe(net[l].b[i], lg.grads[l].bias[i]);
  }
  return r;
}

}  // namespace oracle
