#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

// Inner-loop arithmetic for dense and convolution layers.
//
// Each backend provides the same three primitives. The scalar backend is the
// reference; SIMD backends are checked against it in tests/unit/test_kernels.cpp.
// Selection happens once at startup from CPU features and can be overridden.

namespace uqf::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  Backend backend;
  /// sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  /// y[r] = bias[r] + sum_c w[r * cols + c] * x[c]; bias may be null.
  void (*matvec)(const float* w, const float* x, const float* bias, float* y, std::size_t rows,
                 std::size_t cols);
};

const KernelTable& scalar_table();
#if defined(UQF_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(UQF_HAVE_NEON)
const KernelTable& neon_table();
#endif

bool backend_available(Backend b);
std::vector<Backend> available_backends();
/// Best backend the running CPU supports.
Backend detect_backend();
Backend active_backend();
/// Throws ConfigError if the backend is not available on this CPU.
void set_backend(Backend b);
const KernelTable& table_for(Backend b);
const KernelTable& active();

std::string_view backend_name(Backend b);
/// Accepts "scalar", "avx2", "neon", or "auto" (detect).
std::optional<Backend> parse_backend(std::string_view name);

inline float dot(std::span<const float> a, std::span<const float> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void matvec(std::span<const float> w, std::span<const float> x, const float* bias, std::span<float> y) {
  active().matvec(w.data(), x.data(), bias, y.data(), y.size(), x.size());
}

}  // namespace uqf::kernels
