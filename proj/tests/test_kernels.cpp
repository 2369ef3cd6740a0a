#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "sslforge/kernels.hpp"
#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"

using namespace sslforge;
namespace k = sslforge::kernels;

namespace {

// Sizes that hit every code path: empty, scalar-only tails, exactly one
// vector width, vector + tail, unroll boundaries, and large.
const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 7, 8, 9, 15, 16, 17, 31, 32, 33, 1000, 4097};

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-2.0, 2.0));
  return v;
}

std::vector<double> random_doubles(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// Long-double reference accumulations, independent of any kernel code.
long double ref_sum_squares(const std::vector<float>& x) {
  long double acc = 0.0L;
  for (float v : x) acc += static_cast<long double>(v) * static_cast<long double>(v);
  return acc;
}

long double ref_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
  }
  return acc;
}

bool have_simd() {
  return k::backend_available(k::Backend::kAvx2) ||
         k::backend_available(k::Backend::kNeon);
}

k::Backend simd_backend() {
  return k::backend_available(k::Backend::kAvx2) ? k::Backend::kAvx2
                                                 : k::Backend::kNeon;
}

// Restores whatever backend was active before a test forced another one, so
// test order never changes the backend the rest of the suite runs under.
struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::force_backend(saved); }
};

}  // namespace

TEST_CASE("backend dispatch reports a usable active backend") {
  BackendGuard guard;
  CHECK(k::backend_available(k::Backend::kScalar));
  const k::Backend active = k::active_backend();
  CHECK(k::backend_available(active));
  CHECK(!k::backend_name(active).empty());
  CHECK_THROWS_AS(
      k::force_backend(k::backend_available(k::Backend::kAvx2) ? k::Backend::kNeon
                                                              : k::Backend::kAvx2),
      Error);
  k::force_backend(k::Backend::kScalar);
  CHECK(k::active_backend() == k::Backend::kScalar);
}

TEST_CASE("reductions match a long-double oracle on every backend") {
  for (std::size_t n : kSizes) {
    const auto xf = random_floats(n, derive_seed(1, n));
    const auto a = random_doubles(n, derive_seed(2, n));
    const auto b = random_doubles(n, derive_seed(3, n));

    const double ss_ref = static_cast<double>(ref_sum_squares(xf));
    const double dot_ref = static_cast<double>(ref_dot(a, b));

    std::vector<k::Backend> backends{k::Backend::kScalar};
    if (have_simd()) backends.push_back(simd_backend());
    BackendGuard guard;
    for (k::Backend backend : backends) {
      k::force_backend(backend);
      CAPTURE(k::backend_name(backend));
      CAPTURE(n);
      const double tol = 1e-12 * (1.0 + std::abs(ss_ref));
      CHECK(std::abs(k::sum_squares(xf) - ss_ref) <= tol);
      const double dtol = 1e-12 * (1.0 + std::abs(dot_ref));
      CHECK(std::abs(k::dot(a, b) - dot_ref) <= dtol);
      // l2_squared(a, b) == sum((a-b)^2); validate against dot on the diff.
      std::vector<double> diff(n);
      for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
      const double l2_ref = static_cast<double>(ref_dot(diff, diff));
      CHECK(std::abs(k::l2_squared(a, b) - l2_ref) <=
            1e-12 * (1.0 + std::abs(l2_ref)));
    }
  }
}

TEST_CASE("element-wise kernels are bitwise identical across backends") {
  if (!have_simd()) {
    MESSAGE("no SIMD backend in this build; scalar-only, nothing to compare");
    return;
  }
  BackendGuard guard;
  for (std::size_t n : kSizes) {
    const auto base_f = random_floats(n, derive_seed(10, n));
    const auto src_f = random_floats(n, derive_seed(11, n));
    const auto base_d = random_doubles(n, derive_seed(12, n));
    const auto src_d = random_doubles(n, derive_seed(13, n));
    const float fs = 1.7320508f;
    const double ds = -2.2360679774997896;

    k::force_backend(k::Backend::kScalar);
    auto f_scalar = base_f;
    k::scaled_add(f_scalar, src_f, fs);
    auto d_scalar = base_d;
    k::axpy(d_scalar, src_d, ds);

    k::force_backend(simd_backend());
    auto f_simd = base_f;
    k::scaled_add(f_simd, src_f, fs);
    auto d_simd = base_d;
    k::axpy(d_simd, src_d, ds);

    CAPTURE(n);
    // Bitwise: compare representations, not values (catches -0.0 vs 0.0).
    CHECK(std::memcmp(f_scalar.data(), f_simd.data(), n * sizeof(float)) == 0);
    CHECK(std::memcmp(d_scalar.data(), d_simd.data(), n * sizeof(double)) == 0);
  }
}

TEST_CASE("reductions agree across backends to relative tolerance") {
  if (!have_simd()) return;
  BackendGuard guard;
  for (std::size_t n : kSizes) {
    const auto xf = random_floats(n, derive_seed(20, n));
    const auto a = random_doubles(n, derive_seed(21, n));
    const auto b = random_doubles(n, derive_seed(22, n));

    k::force_backend(k::Backend::kScalar);
    const double ss_s = k::sum_squares(xf);
    const double dot_s = k::dot(a, b);
    const double l2_s = k::l2_squared(a, b);

    k::force_backend(simd_backend());
    CAPTURE(n);
    CHECK(std::abs(k::sum_squares(xf) - ss_s) <= 1e-12 * (1.0 + std::abs(ss_s)));
    CHECK(std::abs(k::dot(a, b) - dot_s) <= 1e-12 * (1.0 + std::abs(dot_s)));
    CHECK(std::abs(k::l2_squared(a, b) - l2_s) <= 1e-12 * (1.0 + std::abs(l2_s)));
  }
}

TEST_CASE("kernel wrappers reject mismatched spans") {
  std::vector<float> dst(4), src(5);
  CHECK_THROWS_AS(k::scaled_add(dst, src, 1.0f), Error);
  std::vector<double> y(4), x(3);
  CHECK_THROWS_AS(k::axpy(y, x, 1.0), Error);
  CHECK_THROWS_AS(k::dot(y, x), Error);
  CHECK_THROWS_AS(k::l2_squared(y, x), Error);
}

TEST_CASE("sum_squares of empty input is zero") {
  CHECK(k::sum_squares({}) == 0.0);
}
