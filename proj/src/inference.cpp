#include "alseg/inference.hpp"

#include <algorithm>
#include <string>

#include "alseg/error.hpp"

namespace alseg::inference {

InferenceStack mc_inferences(const micronet::ModelParams& params, const Tensor& image, std::size_t n_i,
                             std::uint64_t seed, double dropout_rate, SampleId sample_id) {
  if (n_i < 2) throw InputError("mc_inferences: n_i must be >= 2");
  micronet::ForwardTrace trace = micronet::forward_encoder(params, image);
  const std::size_t n_cl = params.n_cl;
  const std::size_t plane = image.dim(1) * image.dim(2);
  InferenceStack stack{sample_id, Tensor({n_i, n_cl, image.dim(1), image.dim(2)})};
  for (std::size_t i = 0; i < n_i; ++i) {
    micronet::forward_decoder(params, trace, micronet::ForwardMode::mc_dropout(seed + i, dropout_rate));
    const Tensor probs = softmax_channels(trace.logits);
    std::copy(probs.data().begin(), probs.data().end(), stack.probs.raw() + i * n_cl * plane);
  }
  return stack;
}

double uncertainty_score(const InferenceStack& stack, std::span<const std::size_t> foreground_classes) {
  if (foreground_classes.empty()) throw InputError("uncertainty_score: empty foreground class set");
  const Tensor& p = stack.probs;
  if (p.rank() != 4) throw ShapeError("uncertainty_score: expected [n_i,n_cl,H,W], got " + shape_string(p.dims()));
  const std::size_t n_i = p.dim(0);
  const std::size_t n_cl = p.dim(1);
  const std::size_t plane = p.dim(2) * p.dim(3);
  for (const std::size_t c : foreground_classes) {
    if (c >= n_cl) throw InputError("uncertainty_score: class " + std::to_string(c) + " out of range");
  }
  const double inv_n = 1.0 / static_cast<double>(n_i);
  double total = 0.0;
  for (std::size_t px = 0; px < plane; ++px) {
    double voxel = 0.0;
    for (const std::size_t c : foreground_classes) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n_i; ++i) mean += p[(i * n_cl + c) * plane + px];
      mean *= inv_n;
      double var = 0.0;
      for (std::size_t i = 0; i < n_i; ++i) {
        const double d = p[(i * n_cl + c) * plane + px] - mean;
        var += d * d;
      }
      voxel += var * inv_n;
    }
    total += voxel / static_cast<double>(foreground_classes.size());
  }
  return total / static_cast<double>(plane);
}

std::vector<std::size_t> foreground_classes(std::size_t n_cl) {
  std::vector<std::size_t> out;
  for (std::size_t c = 1; c < n_cl; ++c) out.push_back(c);
  return out;
}

Tensor abstraction_response(const micronet::ModelParams& params, const Tensor& image) {
  return std::move(micronet::forward_encoder(params, image).abst);
}

Descriptor image_descriptor(const Tensor& abst, SampleId sample_id) {
  if (abst.rank() != 3) throw ShapeError("image_descriptor: expected [C,H,W], got " + shape_string(abst.dims()));
  const Tensor means = reduce(abst, ReduceKind::kMean, {1, 2});
  return {sample_id, std::vector<float>(means.data().begin(), means.data().end())};
}

}  // namespace alseg::inference
