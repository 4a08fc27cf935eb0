#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "alseg/affinity.hpp"
#include "alseg/micronet.hpp"
#include "alseg/tensor.hpp"

namespace alseg::inference {

// Softmax outputs of n_i stochastic forward passes over one image.
struct InferenceStack {
  SampleId sample_id = 0;
  Tensor probs;  // [n_i, n_cl, H, W]

  std::size_t passes() const { return probs.dim(0); }
};

struct Descriptor {
  SampleId sample_id = 0;
  std::vector<float> vec;  // one entry per abstraction channel
};

// n_i MC-dropout passes; pass i samples its mask from seed + i. The encoder
// runs once since dropout only follows the abstraction layer.
InferenceStack mc_inferences(const micronet::ModelParams& params, const Tensor& image, std::size_t n_i,
                             std::uint64_t seed, double dropout_rate, SampleId sample_id = 0);

// Population variance across passes, averaged over the foreground classes and
// then over every pixel.
double uncertainty_score(const InferenceStack& stack, std::span<const std::size_t> foreground_classes);

// Classes 1 .. n_cl-1.
std::vector<std::size_t> foreground_classes(std::size_t n_cl);

// Deterministic post-ReLU abstraction-layer activations [C_a, H/2, W/2].
Tensor abstraction_response(const micronet::ModelParams& params, const Tensor& image);

// Spatial mean of each abstraction channel.
Descriptor image_descriptor(const Tensor& abst, SampleId sample_id = 0);

}  // namespace alseg::inference
