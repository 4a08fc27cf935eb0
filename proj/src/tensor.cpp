#include "alseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "alseg/error.hpp"
#include "alseg/kernels.hpp"

namespace alseg {

std::size_t element_count(std::span<const std::size_t> dims) noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(std::span<const std::size_t> dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> dims, float fill) : dims_(std::move(dims)) {
  for (const std::size_t d : dims_) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(dims_));
  }
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  for (const std::size_t d : dims_) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(dims_));
  }
  if (element_count(dims_) != data_.size()) {
    throw ShapeError("tensor of shape " + shape_string(dims_) + " cannot hold " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const { return Tensor(std::move(dims), data_); }

bool bit_equal(const Tensor& a, const Tensor& b) noexcept {
  return a.dims() == b.dims() &&
         std::memcmp(a.raw(), b.raw(), a.size() * sizeof(float)) == 0;
}

bool all_finite(const Tensor& t) noexcept {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Tensor out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, k, stride, pad, h_out, w_out;
  std::size_t taps() const { return c_in * k * k; }
  std::size_t pixels() const { return h_out * w_out; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, std::size_t stride,
                           std::size_t padding) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_string(input.dims()));
  if (kernels.rank() != 4) {
    throw ShapeError("conv2d: kernels must be [C_out,C_in,k,k], got " + shape_string(kernels.dims()));
  }
  if (stride == 0) throw InputError("conv2d: stride must be positive");
  ConvGeometry g{};
  g.c_in = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.c_out = kernels.dim(0);
  g.k = kernels.dim(2);
  g.stride = stride;
  g.pad = padding;
  if (kernels.dim(1) != g.c_in) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernels.dim(1)) +
                     " input channels, input has " + std::to_string(g.c_in));
  }
  if (kernels.dim(3) != g.k || g.k % 2 == 0) {
    throw ShapeError("conv2d: kernels must be square with odd size, got " + shape_string(kernels.dims()));
  }
  if (g.h + 2 * padding < g.k || g.w + 2 * padding < g.k) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  g.h_out = (g.h + 2 * padding - g.k) / stride + 1;
  g.w_out = (g.w + 2 * padding - g.k) / stride + 1;
  return g;
}

// Output columns [lo, hi) whose input column ox*stride + kx - pad lies inside the image.
std::pair<std::size_t, std::size_t> valid_columns(const ConvGeometry& g, std::size_t kx) {
  const std::size_t lo = kx >= g.pad ? 0 : (g.pad - kx + g.stride - 1) / g.stride;
  const std::size_t hi = g.w + g.pad <= kx ? 0 : std::min(g.w_out, (g.w + g.pad - kx - 1) / g.stride + 1);
  return {lo, std::max(lo, hi)};
}

// col[(ci*k + ky)*k + kx][oy*w_out + ox] = input[ci, oy*s + ky - pad, ox*s + kx - pad]
std::vector<float> im2col(const Tensor& input, const ConvGeometry& g) {
  const std::size_t pixels = g.pixels();
  std::vector<float> col(g.taps() * pixels, 0.0f);
  const float* in = input.raw();
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        float* row = col.data() + ((ci * g.k + ky) * g.k + kx) * pixels;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const float* src = in + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          float* dst = row + oy * g.w_out;
          const auto [lo, hi] = valid_columns(g, kx);
          if (g.stride == 1) {
            std::copy(src + (lo + kx - g.pad), src + (hi + kx - g.pad), dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + kx - g.pad];
          }
        }
      }
    }
  }
  return col;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](float x, float y) { return x + y; });
}
Tensor subtract(const Tensor& a, const Tensor& b) {
  return zip(a, b, "subtract", [](float x, float y) { return x - y; });
}
Tensor multiply(const Tensor& a, const Tensor& b) {
  return zip(a, b, "multiply", [](float x, float y) { return x * y; });
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = a;
  for (float& v : out.data()) v *= s;
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::span<const float> bias,
              std::size_t stride, std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernels, stride, padding);
  if (bias.size() != g.c_out) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " for " +
                     std::to_string(g.c_out) + " output channels");
  }
  const auto& kt = kernels::active();
  const std::vector<float> col = im2col(input, g);
  const std::size_t taps = g.taps();
  const std::size_t pixels = g.pixels();

  Tensor out({g.c_out, g.h_out, g.w_out});
  kt.gemm(kernels.raw(), col.data(), bias.data(), out.raw(), g.c_out, taps, pixels);
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                            std::size_t stride, std::size_t padding, bool need_input_grad) {
  const ConvGeometry g = conv_geometry(input, kernels, stride, padding);
  if (grad_output.rank() != 3 || grad_output.dim(0) != g.c_out || grad_output.dim(1) != g.h_out ||
      grad_output.dim(2) != g.w_out) {
    throw ShapeError("conv2d_backward: grad_output " + shape_string(grad_output.dims()) +
                     " does not match forward output");
  }
  const auto& kt = kernels::active();
  const std::vector<float> col = im2col(input, g);
  const std::size_t taps = g.taps();
  const std::size_t pixels = g.pixels();
  const float* gout = grad_output.raw();

  Conv2dGrads grads;
  grads.bias.resize(g.c_out);
  for (std::size_t co = 0; co < g.c_out; ++co) {
    grads.bias[co] = static_cast<float>(kt.sum(gout + co * pixels, pixels));
  }
  grads.kernels = Tensor(kernels.dims());
  kt.gemm_nt(gout, col.data(), grads.kernels.raw(), g.c_out, taps, pixels);

  if (need_input_grad) {
    // dcol = kernels^T * grad_output, then scatter back through im2col.
    std::vector<float> kernels_t(taps * g.c_out);
    for (std::size_t co = 0; co < g.c_out; ++co) {
      for (std::size_t r = 0; r < taps; ++r) kernels_t[r * g.c_out + co] = kernels.raw()[co * taps + r];
    }
    std::vector<float> dcol(taps * pixels);
    kt.gemm(kernels_t.data(), gout, nullptr, dcol.data(), taps, g.c_out, pixels);
    std::vector<double> dinput(input.size(), 0.0);
    for (std::size_t r = 0; r < taps; ++r) {
      const std::size_t ci = r / (g.k * g.k);
      const std::size_t ky = (r / g.k) % g.k;
      const std::size_t kx = r % g.k;
      for (std::size_t oy = 0; oy < g.h_out; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        double* dst = dinput.data() + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
        const float* src = dcol.data() + r * pixels + oy * g.w_out;
        const auto [lo, hi] = valid_columns(g, kx);
        for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.stride + kx - g.pad] += src[ox];
      }
    }
    grads.input = Tensor(input.dims());
    for (std::size_t i = 0; i < dinput.size(); ++i) grads.input[i] = static_cast<float>(dinput[i]);
  }
  return grads;
}

Tensor softmax_channels(const Tensor& logits) {
  if (logits.rank() != 3) throw ShapeError("softmax_channels: expected [C,H,W], got " + shape_string(logits.dims()));
  const std::size_t channels = logits.dim(0);
  if (channels < 2) throw ShapeError("softmax_channels: need at least 2 channels");
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  Tensor out(logits.dims());
  std::vector<double> e(channels);
  for (std::size_t p = 0; p < plane; ++p) {
    float m = logits[p];
    for (std::size_t c = 1; c < channels; ++c) m = std::max(m, logits[c * plane + p]);
    double z = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      e[c] = std::exp(static_cast<double>(logits[c * plane + p]) - static_cast<double>(m));
      z += e[c];
    }
    for (std::size_t c = 0; c < channels; ++c) {
      // Floor at the smallest normal float so every probability stays positive.
      out[c * plane + p] = std::max(static_cast<float>(e[c] / z), std::numeric_limits<float>::min());
    }
  }
  return out;
}

Tensor reduce(const Tensor& t, ReduceKind kind, std::vector<std::size_t> axes) {
  if (axes.empty()) return t;
  std::sort(axes.begin(), axes.end());
  if (std::adjacent_find(axes.begin(), axes.end()) != axes.end()) {
    throw ShapeError("reduce: duplicate axis");
  }
  if (axes.back() >= t.rank()) {
    throw ShapeError("reduce: axis " + std::to_string(axes.back()) + " out of range for " +
                     shape_string(t.dims()));
  }

  std::vector<bool> reduced(t.rank(), false);
  for (const std::size_t a : axes) reduced[a] = true;
  std::vector<std::size_t> out_dims;
  for (std::size_t a = 0; a < t.rank(); ++a) {
    if (!reduced[a]) out_dims.push_back(t.dim(a));
  }
  const std::size_t out_size = element_count(out_dims);
  const std::size_t group = t.size() / out_size;

  std::vector<double> acc(out_size, kind == ReduceKind::kMax ? -std::numeric_limits<double>::infinity() : 0.0);
  if (out_dims.empty() && kind != ReduceKind::kMax) {
    acc[0] = kernels::active().sum(t.raw(), t.size());
  } else {
    // Odometer walk over the input, tracking the matching output offset.
    std::vector<std::size_t> index(t.rank(), 0);
    std::vector<std::size_t> out_stride(t.rank(), 0);
    std::size_t s = 1;
    for (std::size_t a = t.rank(); a-- > 0;) {
      if (!reduced[a]) {
        out_stride[a] = s;
        s *= t.dim(a);
      }
    }
    std::size_t out_offset = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t[i];
      if (kind == ReduceKind::kMax) {
        acc[out_offset] = std::max(acc[out_offset], v);
      } else {
        acc[out_offset] += v;
      }
      for (std::size_t a = t.rank(); a-- > 0;) {
        out_offset += out_stride[a];
        if (++index[a] < t.dim(a)) break;
        out_offset -= out_stride[a] * index[a];
        index[a] = 0;
      }
    }
  }

  Tensor out(out_dims);
  for (std::size_t i = 0; i < out_size; ++i) {
    const double v = kind == ReduceKind::kMean ? acc[i] / static_cast<double>(group) : acc[i];
    out[i] = static_cast<float>(v);
  }
  return out;
}

}  // namespace alseg
