#include "sslforge/kernels.hpp"

#if defined(SSLFORGE_BUILD_NEON)

#include <arm_neon.h>

// NEON variants for aarch64, mirroring the AVX2 file: explicit mul+add (two
// roundings per element) for scaled_add/axpy so they stay bitwise equal to
// the scalar reference, fused accumulation for the tolerance-checked
// reductions.

namespace sslforge::kernels {
namespace {

double neon_sum_squares(const float* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(x + i);
    const float64x2_t lo = vcvt_f64_f32(vget_low_f32(v));
    const float64x2_t hi = vcvt_f64_f32(vget_high_f32(v));
    acc0 = vfmaq_f64(acc0, lo, lo);
    acc1 = vfmaq_f64(acc1, hi, hi);
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) {
    const double v = x[i];
    acc += v * v;
  }
  return acc;
}

void neon_scaled_add(float* dst, const float* src, std::size_t n, float scale) {
  const float32x4_t vs = vdupq_n_f32(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t d = vld1q_f32(dst + i);
    const float32x4_t s = vld1q_f32(src + i);
    vst1q_f32(dst + i, vaddq_f32(d, vmulq_f32(vs, s)));
  }
  for (; i < n; ++i) {
    dst[i] = dst[i] + scale * src[i];
  }
}

void neon_axpy(double* y, const double* x, std::size_t n, double a) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t yv = vld1q_f64(y + i);
    const float64x2_t xv = vld1q_f64(x + i);
    vst1q_f64(y + i, vaddq_f64(yv, vmulq_f64(va, xv)));
  }
  for (; i < n; ++i) {
    y[i] = y[i] + a * x[i];
  }
}

double neon_dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double neon_l2_squared(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t d1 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc0 = vfmaq_f64(acc0, d0, d0);
    acc1 = vfmaq_f64(acc1, d1, d1);
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{
      neon_sum_squares, neon_scaled_add, neon_axpy, neon_dot, neon_l2_squared,
  };
  return table;
}

}  // namespace sslforge::kernels

#endif  // SSLFORGE_BUILD_NEON
