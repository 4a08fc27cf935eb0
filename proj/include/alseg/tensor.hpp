#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace alseg {

// Dense row-major array of 32-bit floats (last dimension fastest). Images and
// activations use the channels-first (C, H, W) convention. A rank-0 tensor
// holds a single value.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float* raw() noexcept { return data_.data(); }
  const float* raw() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // (c, y, x) access for rank-3 tensors and (y, x) for rank-2; unchecked.
  float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * dims_[1] + y) * dims_[2] + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * dims_[1] + y) * dims_[2] + x];
  }
  float& at(std::size_t y, std::size_t x) noexcept { return data_[y * dims_[1] + x]; }
  float at(std::size_t y, std::size_t x) const noexcept { return data_[y * dims_[1] + x]; }

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  Tensor reshaped(std::vector<std::size_t> dims) const;

  // Value equality (so +0 == -0). Use bit_equal for exact payload identity.
  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

std::size_t element_count(std::span<const std::size_t> dims) noexcept;
std::string shape_string(std::span<const std::size_t> dims);
bool bit_equal(const Tensor& a, const Tensor& b) noexcept;
bool all_finite(const Tensor& t) noexcept;

// Elementwise arithmetic; operands must share a shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& a);

// Cross-correlation of input [C_in,H,W] with kernels [C_out,C_in,k,k]
// (k odd), zero padding. Output [C_out,H',W'] with
// H' = (H + 2*padding - k) / stride + 1. Accumulates in double.
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::span<const float> bias,
              std::size_t stride, std::size_t padding);

struct Conv2dGrads {
  Tensor input;    // empty when not requested
  Tensor kernels;
  std::vector<float> bias;
};

// Gradients of a conv2d call with respect to its input, kernels and bias,
// given the gradient of the loss with respect to its output.
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                            std::size_t stride, std::size_t padding, bool need_input_grad = true);

// Per-location softmax over the channel axis of a [C,H,W] tensor (C >= 2).
Tensor softmax_channels(const Tensor& logits);

enum class ReduceKind { kSum, kMean, kMax };

// Reduces over the listed axes (any order, no duplicates) and drops them from
// the shape. An empty axis list returns the input unchanged.
Tensor reduce(const Tensor& t, ReduceKind kind, std::vector<std::size_t> axes);

}  // namespace alseg
