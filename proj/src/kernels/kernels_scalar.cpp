#include "uqf/kernels.hpp"

namespace uqf::kernels {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_scalar(const float* w, const float* x, const float* bias, float* y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = (bias ? bias[r] : 0.0f) + dot_scalar(w + r * cols, x, cols);
  }
}

constexpr KernelTable kScalar{Backend::scalar, dot_scalar, axpy_scalar, matvec_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace uqf::kernels
