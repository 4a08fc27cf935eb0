#include "alseg/kernels.hpp"

#include <vector>

namespace alseg::kernels {
namespace {

void gemm_scalar(const float* a, const float* b, const float* bias, float* out, std::size_t m, std::size_t k,
                 std::size_t n) {
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    const double b0 = bias != nullptr ? static_cast<double>(bias[i]) : 0.0;
    for (std::size_t j = 0; j < n; ++j) acc[j] = b0;
    for (std::size_t p = 0; p < k; ++p) {
      const double w = a[i * k + p];
      const float* row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += w * static_cast<double>(row[j]);
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<float>(acc[j]);
  }
}

void gemm_nt_scalar(const float* a, const float* b, float* out, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<double>(a[i * k + p]) * static_cast<double>(b[j * k + p]);
      out[i * n + j] = static_cast<float>(s);
    }
  }
}

double dot_scalar(const float* x, const float* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

double sum_scalar(const float* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double squared_distance_scalar(const float* x, const float* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    s += d * d;
  }
  return s;
}

constexpr KernelTable kScalar{
    "scalar", &gemm_scalar, &gemm_nt_scalar, &dot_scalar, &sum_scalar, &squared_distance_scalar,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace alseg::kernels
