#pragma once

// Micro fully-convolutional segmentation network:
//
//   image [1,H,W]
//   conv1  3x3, n_ch,   stride 1, ReLU
//   conv2  3x3, 2*n_ch, stride 2, ReLU
//   conv3  3x3, 2*n_ch, stride 1, ReLU   <- abstraction layer
//   spatial dropout (whole channels)
//   conv4  3x3, 2*n_ch, stride 1, ReLU
//   nearest-neighbour upsample x2
//   conv5  3x3, n_cl,   stride 1         <- logits, softmax outside
//
// Training minimizes cross-entropy plus lambda times the negative channel
// entropy of the abstraction layer. Gradients are derived by hand.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "alseg/tensor.hpp"

namespace alseg::micronet {

inline constexpr std::size_t kLayerCount = 5;
inline constexpr std::size_t kAbstractionLayer = 2;
inline constexpr std::size_t kKernelSize = 3;

// Offset that keeps the entropy normalization defined for all-zero columns.
inline constexpr double kEntropyEpsilon = 1e-8;

struct LayerSpec {
  std::string_view name;
  std::size_t stride;
  bool relu;
};

const LayerSpec& layer_spec(std::size_t layer);

struct ConvWeights {
  Tensor weight;  // [C_out, C_in, 3, 3]
  Tensor bias;    // [C_out]
};

using LayerTensors = std::array<ConvWeights, kLayerCount>;
using Gradients = LayerTensors;

struct AdamState {
  LayerTensors m;
  LayerTensors v;
  std::int64_t t = 0;
};

struct ModelParams {
  std::size_t n_ch = 0;
  std::size_t n_cl = 0;
  LayerTensors layers;
  AdamState adam;

  std::size_t abstraction_channels() const noexcept { return 2 * n_ch; }
  std::size_t parameter_count() const noexcept;
};

struct Hyper {
  double learning_rate = 5e-4;
  double dropout_rate = 0.5;
  double lambda = 0.0;
  std::size_t batch_size = 8;

  void validate() const;
};

// |R| of the abstraction layer for an H x W input.
std::size_t abstraction_size(std::size_t n_ch, std::size_t height, std::size_t width) noexcept;

// lambda = 1 / (360 * |R|), the default entropy-loss weight.
double default_lambda(std::size_t n_ch, std::size_t height, std::size_t width) noexcept;

enum class Mode { kDeterministic, kTrain, kMcDropout };

struct ForwardMode {
  Mode mode = Mode::kDeterministic;
  std::uint64_t seed = 0;
  double dropout_rate = 0.0;

  static ForwardMode deterministic() { return {}; }
  static ForwardMode train(std::uint64_t seed, double rate) { return {Mode::kTrain, seed, rate}; }
  static ForwardMode mc_dropout(std::uint64_t seed, double rate) { return {Mode::kMcDropout, seed, rate}; }
};

struct ForwardTrace {
  Tensor input;
  Tensor conv1;      // post-ReLU
  Tensor conv2;      // post-ReLU
  Tensor abst;       // post-ReLU abstraction response R^{l_abst}
  Tensor dropped;    // abst after the dropout mask
  Tensor conv4;      // post-ReLU
  Tensor upsampled;
  Tensor logits;
  // Per-channel multiplier (0 or 1/(1-p)); empty in deterministic mode.
  std::vector<float> dropout_mask;
};

ModelParams init_params(std::uint64_t seed, std::size_t n_ch, std::size_t n_cl);

// Channel mask for spatial dropout: each channel is dropped with probability
// `rate`; survivors are scaled by 1/(1-rate). Pure function of the seed.
std::vector<float> spatial_dropout_mask(std::uint64_t seed, std::size_t channels, double rate);

ForwardTrace forward(const ModelParams& params, const Tensor& image, const ForwardMode& mode);

// Layers up to and including the abstraction layer.
ForwardTrace forward_encoder(const ModelParams& params, const Tensor& image);
// Completes a trace produced by forward_encoder under the given mode.
void forward_decoder(const ModelParams& params, ForwardTrace& trace, const ForwardMode& mode);

// Mean over pixels of -log softmax(logits)[label]. labels: [H,W] class ids.
double seg_loss(const Tensor& logits, const Tensor& labels);
// d seg_loss / d logits.
Tensor seg_loss_grad(const Tensor& logits, const Tensor& labels);

// -sum over locations of the channel entropy of (a + eps) / sum(a + eps).
double entropy_loss(const Tensor& abst);
// d entropy_loss / d abst.
Tensor entropy_loss_grad(const Tensor& abst);

// Backpropagates from dL/dlogits (and an optional direct dL/dabst term) to
// every parameter.
Gradients backward(const ModelParams& params, const ForwardTrace& trace, const Tensor& grad_logits,
                   const Tensor* grad_abst_extra = nullptr);

struct TrainingExample {
  const Tensor* image = nullptr;  // [1,H,W]
  const Tensor* label = nullptr;  // [H,W]
};

struct LossAndGrad {
  double total = 0.0;    // mean over the batch of seg + lambda * entropy
  double seg = 0.0;      // mean segmentation loss
  double entropy = 0.0;  // mean entropy loss (unweighted)
  Gradients grads;
};

// Seed used for the dropout mask of batch item `index`.
std::uint64_t batch_item_seed(std::uint64_t seed, std::size_t index) noexcept;

LossAndGrad total_loss_and_grad(const ModelParams& params, std::span<const TrainingExample> batch,
                                const Hyper& hyper, std::uint64_t seed);

Gradients zeros_like(const ModelParams& params);

// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) in place.
void adam_step(ModelParams& params, const Gradients& grads, const Hyper& hyper);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;
};

// n_steps Adam steps on minibatches drawn uniformly with replacement.
TrainResult train(ModelParams params, std::span<const TrainingExample> annotated, const Hyper& hyper,
                  std::size_t n_steps, std::uint64_t seed);

}  // namespace alseg::micronet
