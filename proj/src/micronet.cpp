#include "alseg/micronet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alseg/affinity.hpp"
#include "alseg/error.hpp"
#include "alseg/rng.hpp"

namespace alseg::micronet {
namespace {

constexpr std::array<LayerSpec, kLayerCount> kLayers{{
    {"conv1", 1, true},
    {"conv2_down", 2, true},
    {"conv3_abst", 1, true},
    {"conv4", 1, true},
    {"conv5_logits", 1, false},
}};

constexpr std::size_t kPadding = 1;

std::array<std::size_t, kLayerCount> in_channels(std::size_t n_ch) {
  return {1, n_ch, 2 * n_ch, 2 * n_ch, 2 * n_ch};
}

std::array<std::size_t, kLayerCount> out_channels(std::size_t n_ch, std::size_t n_cl) {
  return {n_ch, 2 * n_ch, 2 * n_ch, 2 * n_ch, n_cl};
}

Tensor conv_layer(const ModelParams& params, std::size_t layer, const Tensor& input) {
  const ConvWeights& w = params.layers[layer];
  Tensor out = conv2d(input, w.weight, w.bias.data(), kLayers[layer].stride, kPadding);
  if (kLayers[layer].relu) {
    for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  }
  return out;
}

Tensor upsample2(const Tensor& t) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) out.at(ch, y, x) = t.at(ch, y / 2, x / 2);
    }
  }
  return out;
}

Tensor upsample2_backward(const Tensor& grad) {
  const std::size_t c = grad.dim(0), h = grad.dim(1) / 2, w = grad.dim(2) / 2;
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double s = static_cast<double>(grad.at(ch, 2 * y, 2 * x)) + grad.at(ch, 2 * y, 2 * x + 1) +
                         grad.at(ch, 2 * y + 1, 2 * x) + grad.at(ch, 2 * y + 1, 2 * x + 1);
        out.at(ch, y, x) = static_cast<float>(s);
      }
    }
  }
  return out;
}

// grad *= (activation > 0)
void relu_backward_inplace(Tensor& grad, const Tensor& activation) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0f)) grad[i] = 0.0f;
  }
}

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeError("micronet: image must be [1,H,W], got " + shape_string(image.dims()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (h % 2 != 0 || w % 2 != 0 || h < 8 || w < 8) {
    throw ShapeError("micronet: image extents must be even and >= 8, got " + shape_string(image.dims()));
  }
}

void check_labels(const Tensor& logits, const Tensor& labels) {
  if (labels.rank() != 2 || labels.dim(0) != logits.dim(1) || labels.dim(1) != logits.dim(2)) {
    throw ShapeError("seg_loss: labels " + shape_string(labels.dims()) + " do not match logits " +
                     shape_string(logits.dims()));
  }
  const auto n_cl = static_cast<float>(logits.dim(0));
  for (const float v : labels.data()) {
    if (!(v >= 0.0f && v < n_cl) || v != std::floor(v)) {
      throw InputError("seg_loss: label " + std::to_string(v) + " outside [0, " +
                       std::to_string(logits.dim(0)) + ")");
    }
  }
}

void accumulate(Gradients& into, const Gradients& g) {
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (std::size_t i = 0; i < into[l].weight.size(); ++i) into[l].weight[i] += g[l].weight[i];
    for (std::size_t i = 0; i < into[l].bias.size(); ++i) into[l].bias[i] += g[l].bias[i];
  }
}

}  // namespace

const LayerSpec& layer_spec(std::size_t layer) { return kLayers.at(layer); }

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const ConvWeights& w : layers) n += w.weight.size() + w.bias.size();
  return n;
}

void Hyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

std::size_t abstraction_size(std::size_t n_ch, std::size_t height, std::size_t width) noexcept {
  return 2 * n_ch * (height / 2) * (width / 2);
}

double default_lambda(std::size_t n_ch, std::size_t height, std::size_t width) noexcept {
  return 1.0 / (360.0 * static_cast<double>(abstraction_size(n_ch, height, width)));
}

ModelParams init_params(std::uint64_t seed, std::size_t n_ch, std::size_t n_cl) {
  if (n_ch < 1) throw InputError("init_params: n_ch must be >= 1");
  if (n_cl < 2) throw InputError("init_params: n_cl must be >= 2");
  ModelParams params;
  params.n_ch = n_ch;
  params.n_cl = n_cl;
  const auto cin = in_channels(n_ch);
  const auto cout = out_channels(n_ch, n_cl);
  Rng rng(derive_seed(seed, 0, Stream::kInit));
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const std::size_t fan_in = cin[l] * kKernelSize * kKernelSize;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor w({cout[l], cin[l], kKernelSize, kKernelSize});
    for (float& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    params.layers[l] = {std::move(w), Tensor({cout[l]})};
  }
  params.adam.m = zeros_like(params);
  params.adam.v = zeros_like(params);
  return params;
}

Gradients zeros_like(const ModelParams& params) {
  Gradients g;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    g[l] = {Tensor(params.layers[l].weight.dims()), Tensor(params.layers[l].bias.dims())};
  }
  return g;
}

std::vector<float> spatial_dropout_mask(std::uint64_t seed, std::size_t channels, double rate) {
  std::vector<float> mask(channels, 1.0f);
  if (rate <= 0.0) return mask;
  const auto keep_scale = static_cast<float>(1.0 / (1.0 - rate));
  Rng rng(seed);
  for (float& m : mask) m = rng.bernoulli(rate) ? 0.0f : keep_scale;
  return mask;
}

ForwardTrace forward_encoder(const ModelParams& params, const Tensor& image) {
  check_image(image);
  ForwardTrace trace;
  trace.input = image;
  trace.conv1 = conv_layer(params, 0, image);
  trace.conv2 = conv_layer(params, 1, trace.conv1);
  trace.abst = conv_layer(params, 2, trace.conv2);
  return trace;
}

void forward_decoder(const ModelParams& params, ForwardTrace& trace, const ForwardMode& mode) {
  trace.dropped = trace.abst;
  trace.dropout_mask.clear();
  if (mode.mode != Mode::kDeterministic) {
    trace.dropout_mask = spatial_dropout_mask(mode.seed, trace.abst.dim(0), mode.dropout_rate);
    const std::size_t plane = trace.abst.dim(1) * trace.abst.dim(2);
    for (std::size_t c = 0; c < trace.dropout_mask.size(); ++c) {
      const float m = trace.dropout_mask[c];
      if (m == 1.0f) continue;
      float* row = trace.dropped.raw() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) row[p] *= m;
    }
  }
  trace.conv4 = conv_layer(params, 3, trace.dropped);
  trace.upsampled = upsample2(trace.conv4);
  trace.logits = conv_layer(params, 4, trace.upsampled);
}

ForwardTrace forward(const ModelParams& params, const Tensor& image, const ForwardMode& mode) {
  ForwardTrace trace = forward_encoder(params, image);
  forward_decoder(params, trace, mode);
  return trace;
}

double seg_loss(const Tensor& logits, const Tensor& labels) {
  check_labels(logits, labels);
  const std::size_t channels = logits.dim(0);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    double m = logits[p];
    for (std::size_t c = 1; c < channels; ++c) m = std::max(m, static_cast<double>(logits[c * plane + p]));
    double z = 0.0;
    for (std::size_t c = 0; c < channels; ++c) z += std::exp(logits[c * plane + p] - m);
    const auto truth = static_cast<std::size_t>(labels[p]);
    total += std::log(z) + m - logits[truth * plane + p];
  }
  return total / static_cast<double>(plane);
}

Tensor seg_loss_grad(const Tensor& logits, const Tensor& labels) {
  check_labels(logits, labels);
  const std::size_t channels = logits.dim(0);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  const double inv = 1.0 / static_cast<double>(plane);
  Tensor grad(logits.dims());
  std::vector<double> e(channels);
  for (std::size_t p = 0; p < plane; ++p) {
    double m = logits[p];
    for (std::size_t c = 1; c < channels; ++c) m = std::max(m, static_cast<double>(logits[c * plane + p]));
    double z = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      e[c] = std::exp(logits[c * plane + p] - m);
      z += e[c];
    }
    const auto truth = static_cast<std::size_t>(labels[p]);
    for (std::size_t c = 0; c < channels; ++c) {
      const double target = c == truth ? 1.0 : 0.0;
      grad[c * plane + p] = static_cast<float>((e[c] / z - target) * inv);
    }
  }
  return grad;
}

double entropy_loss(const Tensor& abst) {
  const Tensor map = affinity::channel_entropy_map(abst);
  double total = 0.0;
  for (const float h : map.data()) total += h;
  return -total;
}

Tensor entropy_loss_grad(const Tensor& abst) {
  if (abst.rank() != 3) throw ShapeError("entropy_loss_grad: expected [C,H,W], got " + shape_string(abst.dims()));
  const std::size_t channels = abst.dim(0);
  const std::size_t plane = abst.dim(1) * abst.dim(2);
  Tensor grad(abst.dims());
  std::vector<double> logp(channels);
  for (std::size_t p = 0; p < plane; ++p) {
    double mass = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double a = abst[c * plane + p];
      if (a < 0.0) throw InputError("entropy_loss_grad: negative activation");
      mass += a + kEntropyEpsilon;
    }
    double h = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double prob = (abst[c * plane + p] + kEntropyEpsilon) / mass;
      logp[c] = std::log(prob);
      h -= prob * logp[c];
    }
    // d(-H)/da_c = (ln p_c + H) / mass
    for (std::size_t c = 0; c < channels; ++c) {
      grad[c * plane + p] = static_cast<float>((logp[c] + h) / mass);
    }
  }
  return grad;
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace, const Tensor& grad_logits,
                   const Tensor* grad_abst_extra) {
  Gradients g;
  auto take = [&g](std::size_t layer, Conv2dGrads& cg) {
    g[layer].weight = std::move(cg.kernels);
    const std::size_t n = cg.bias.size();
    g[layer].bias = Tensor({n}, std::move(cg.bias));
  };

  Conv2dGrads c5 = conv2d_backward(trace.upsampled, params.layers[4].weight, grad_logits,
                                   kLayers[4].stride, kPadding);
  take(4, c5);
  Tensor d4 = upsample2_backward(c5.input);
  relu_backward_inplace(d4, trace.conv4);

  Conv2dGrads c4 = conv2d_backward(trace.dropped, params.layers[3].weight, d4, kLayers[3].stride, kPadding);
  take(3, c4);
  Tensor d3 = std::move(c4.input);
  if (!trace.dropout_mask.empty()) {
    const std::size_t plane = d3.dim(1) * d3.dim(2);
    for (std::size_t c = 0; c < trace.dropout_mask.size(); ++c) {
      float* row = d3.raw() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) row[p] *= trace.dropout_mask[c];
    }
  }
  if (grad_abst_extra != nullptr) {
    for (std::size_t i = 0; i < d3.size(); ++i) d3[i] += (*grad_abst_extra)[i];
  }
  relu_backward_inplace(d3, trace.abst);

  Conv2dGrads c3 = conv2d_backward(trace.conv2, params.layers[2].weight, d3, kLayers[2].stride, kPadding);
  take(2, c3);
  Tensor d2 = std::move(c3.input);
  relu_backward_inplace(d2, trace.conv2);

  Conv2dGrads c2 = conv2d_backward(trace.conv1, params.layers[1].weight, d2, kLayers[1].stride, kPadding);
  take(1, c2);
  Tensor d1 = std::move(c2.input);
  relu_backward_inplace(d1, trace.conv1);

  Conv2dGrads c1 = conv2d_backward(trace.input, params.layers[0].weight, d1, kLayers[0].stride, kPadding,
                                   /*need_input_grad=*/false);
  take(0, c1);
  return g;
}

std::uint64_t batch_item_seed(std::uint64_t seed, std::size_t index) noexcept {
  return derive_seed(seed, {static_cast<std::uint64_t>(index)});
}

LossAndGrad total_loss_and_grad(const ModelParams& params, std::span<const TrainingExample> batch,
                                const Hyper& hyper, std::uint64_t seed) {
  if (batch.empty()) throw InputError("total_loss_and_grad: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  LossAndGrad out;
  out.grads = zeros_like(params);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const ForwardTrace trace = forward(params, *batch[b].image,
                                       ForwardMode::train(batch_item_seed(seed, b), hyper.dropout_rate));
    const double seg = seg_loss(trace.logits, *batch[b].label);
    const double ent = entropy_loss(trace.abst);
    out.seg += seg * inv_batch;
    out.entropy += ent * inv_batch;

    const Tensor dlogits = scale(seg_loss_grad(trace.logits, *batch[b].label), static_cast<float>(inv_batch));
    if (hyper.lambda > 0.0) {
      Tensor dabst = entropy_loss_grad(trace.abst);
      const double w = hyper.lambda * inv_batch;
      for (float& v : dabst.data()) v = static_cast<float>(v * w);
      accumulate(out.grads, backward(params, trace, dlogits, &dabst));
    } else {
      accumulate(out.grads, backward(params, trace, dlogits));
    }
  }
  out.total = out.seg + hyper.lambda * out.entropy;
  return out;
}

void adam_step(ModelParams& params, const Gradients& grads, const Hyper& hyper) {
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    if (!all_finite(grads[l].weight) || !all_finite(grads[l].bias)) {
      throw TrainingError("adam_step: non-finite gradient in layer " + std::string(kLayers[l].name));
    }
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  params.adam.t += 1;
  const double t = static_cast<double>(params.adam.t);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);

  auto update = [&](Tensor& p, Tensor& m, Tensor& v, const Tensor& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
      const double vi = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = hyper.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + kEps);
      p[i] = static_cast<float>(p[i] - step);
    }
  };
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    update(params.layers[l].weight, params.adam.m[l].weight, params.adam.v[l].weight, grads[l].weight);
    update(params.layers[l].bias, params.adam.m[l].bias, params.adam.v[l].bias, grads[l].bias);
  }
}

TrainResult train(ModelParams params, std::span<const TrainingExample> annotated, const Hyper& hyper,
                  std::size_t n_steps, std::uint64_t seed) {
  hyper.validate();
  if (annotated.empty()) throw InputError("train: annotated set is empty");
  TrainResult result;
  result.loss_history.reserve(n_steps);
  Rng sampler(derive_seed(seed, {0}));
  std::vector<TrainingExample> batch(hyper.batch_size);
  for (std::size_t step = 0; step < n_steps; ++step) {
    for (auto& item : batch) item = annotated[sampler.below(annotated.size())];
    const LossAndGrad lg = total_loss_and_grad(params, batch, hyper, derive_seed(seed, {1, step}));
    adam_step(params, lg.grads, hyper);
    result.loss_history.push_back(lg.total);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace alseg::micronet
