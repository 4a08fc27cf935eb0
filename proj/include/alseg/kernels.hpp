#pragma once

// Inner-loop kernels behind the tensor operations. Every kernel reads 32-bit
// floats and accumulates in 64-bit doubles. A scalar reference table is
// always available; an AVX2/FMA table is compiled in on x86-64 and chosen at
// runtime when the CPU supports it. Tables differ only in summation order and
// FMA rounding, so results agree to double rounding, not bitwise.

#include <cstddef>
#include <string_view>

namespace alseg::kernels {

struct KernelTable {
  std::string_view name;
  // out[m x n] = bias[m] (broadcast over columns) + a[m x k] * b[k x n].
  // bias may be null.
  void (*gemm)(const float* a, const float* b, const float* bias, float* out, std::size_t m, std::size_t k,
               std::size_t n);
  // out[m x n] = a[m x k] * transpose(b[n x k]).
  void (*gemm_nt)(const float* a, const float* b, float* out, std::size_t m, std::size_t n, std::size_t k);
  // sum_i x[i] * y[i]
  double (*dot)(const float* x, const float* y, std::size_t n);
  // sum_i x[i]
  double (*sum)(const float* x, std::size_t n);
  // sum_i (x[i] - y[i])^2
  double (*squared_distance)(const float* x, const float* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the build lacks the AVX2 table or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table() noexcept;

// The table used by tensor operations. Chosen once on first use: AVX2 when
// available, scalar otherwise. ALSEG_KERNELS=scalar|avx2 forces a choice.
const KernelTable& active() noexcept;

// Replaces the active table and returns the previous one. Not synchronized;
// meant for tests and benchmarks that compare tables in one process.
const KernelTable& set_active(const KernelTable& table) noexcept;

class ScopedKernels {
 public:
  explicit ScopedKernels(const KernelTable& table) : previous_(&set_active(table)) {}
  ~ScopedKernels() { set_active(*previous_); }
  ScopedKernels(const ScopedKernels&) = delete;
  ScopedKernels& operator=(const ScopedKernels&) = delete;

 private:
  const KernelTable* previous_;
};

namespace detail {
// Defined in the AVX2 translation unit when it is built.
const KernelTable& avx2_table_unchecked() noexcept;
}  // namespace detail

}  // namespace alseg::kernels
