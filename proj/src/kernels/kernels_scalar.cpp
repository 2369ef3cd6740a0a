#include "sslforge/kernels.hpp"

// Reference implementations. Deliberately plain loops: this file is the
// ground truth the SIMD variants are tested against. Built with
// -ffp-contract=off so the compiler cannot fuse the mul+add in scaled_add
// and axpy, which is what makes them bitwise comparable to the vector code.

namespace sslforge::kernels {
namespace {

double scalar_sum_squares(const float* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    acc += v * v;
  }
  return acc;
}

void scalar_scaled_add(float* dst, const float* src, std::size_t n, float scale) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = dst[i] + scale * src[i];
  }
}

void scalar_axpy(double* y, const double* x, std::size_t n, double a) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = y[i] + a * x[i];
  }
}

double scalar_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double scalar_l2_squared(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      scalar_sum_squares, scalar_scaled_add, scalar_axpy,
      scalar_dot,         scalar_l2_squared,
  };
  return table;
}

}  // namespace sslforge::kernels
