#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace sslforge::kernels {

/// The inner loops that dominate runtime (energy sums, waveform mixing,
/// squared distances, matrix-vector products) are implemented twice: a plain
/// scalar reference and a SIMD variant per architecture. A function table is
/// selected once at startup based on what the CPU supports; tests compare the
/// variants against each other on every build.
///
/// Accuracy contract, per kernel family:
///  * element-wise kernels (scaled_add, axpy) produce bitwise identical
///    results on every backend: one rounding per element, no fused
///    multiply-add, so the scalar and vector lanes compute the same thing;
///  * reductions (sum_squares, dot, l2_squared) accumulate in double but may
///    associate differently per backend, so they agree to relative
///    tolerance, not bitwise. Every consumer of a reduction treats it as an
///    approximate quantity.
enum class Backend {
  kScalar,
  kAvx2,
  kNeon,
};

std::string_view backend_name(Backend b);

/// True if this binary contains the backend and the CPU can run it.
bool backend_available(Backend b);

/// The backend currently in use. Resolution order: force_backend() if called,
/// else the SSLFORGE_KERNELS environment variable ("scalar", "avx2", "neon"),
/// else the widest available SIMD variant, else scalar.
Backend active_backend();

/// Overrides dispatch, e.g. to pin the scalar reference in tests.
/// Throws Error if the backend is not available on this machine.
void force_backend(Backend b);

/// Sum of squares of x, accumulated in double. Returns 0 for empty input.
double sum_squares(std::span<const float> x);

/// dst[i] += scale * src[i]. Spans must have equal length.
/// Bitwise identical across backends.
void scaled_add(std::span<float> dst, std::span<const float> src, float scale);

/// y[i] += a * x[i] in double. Spans must have equal length.
/// Bitwise identical across backends.
void axpy(std::span<double> y, std::span<const double> x, double a);

/// Inner product of a and b, accumulated in double. Equal lengths required.
double dot(std::span<const double> a, std::span<const double> b);

/// Squared Euclidean distance between a and b. Equal lengths required.
double l2_squared(std::span<const double> a, std::span<const double> b);

/// Implementation tables. Each backend source file fills one of these in;
/// dispatch.cpp routes the public functions through the selected table.
struct KernelTable {
  double (*sum_squares)(const float*, std::size_t);
  void (*scaled_add)(float*, const float*, std::size_t, float);
  void (*axpy)(double*, const double*, std::size_t, double);
  double (*dot)(const double*, const double*, std::size_t);
  double (*l2_squared)(const double*, const double*, std::size_t);
};

const KernelTable& scalar_table();
#if defined(SSLFORGE_BUILD_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(SSLFORGE_BUILD_NEON)
const KernelTable& neon_table();
#endif

}  // namespace sslforge::kernels
