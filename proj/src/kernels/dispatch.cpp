#include "sslforge/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "sslforge/util.hpp"

namespace sslforge::kernels {
namespace {

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::kScalar};

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return &scalar_table();
    case Backend::kAvx2:
#if defined(SSLFORGE_BUILD_AVX2)
      return &avx2_table();
#else
      return nullptr;
#endif
    case Backend::kNeon:
#if defined(SSLFORGE_BUILD_NEON)
      return &neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(SSLFORGE_BUILD_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
      // NEON is part of the aarch64 baseline; if the file was built, it runs.
#if defined(SSLFORGE_BUILD_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend parse_backend_name(const std::string& name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  throw Error("unknown kernel backend '" + name +
              "' (expected scalar, avx2, or neon)");
}

void select(Backend b) {
  const KernelTable* table = table_for(b);
  if (table == nullptr || !cpu_supports(b)) {
    throw Error("kernel backend '" + std::string(backend_name(b)) +
                "' is not available on this machine");
  }
  g_table.store(table, std::memory_order_release);
  g_backend.store(b, std::memory_order_release);
}

Backend default_backend() {
  if (const char* env = std::getenv("SSLFORGE_KERNELS")) {
    return parse_backend_name(env);
  }
  if (cpu_supports(Backend::kAvx2)) return Backend::kAvx2;
  if (cpu_supports(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

const KernelTable& table() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    // First use: resolve env/CPU once. Races are benign; both writers would
    // select the same backend.
    select(default_backend());
    t = g_table.load(std::memory_order_acquire);
  }
  return *t;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  return table_for(b) != nullptr && cpu_supports(b);
}

Backend active_backend() {
  table();  // ensure initialized
  return g_backend.load(std::memory_order_acquire);
}

void force_backend(Backend b) { select(b); }

double sum_squares(std::span<const float> x) {
  return table().sum_squares(x.data(), x.size());
}

void scaled_add(std::span<float> dst, std::span<const float> src, float scale) {
  if (dst.size() != src.size()) {
    throw Error("scaled_add: size mismatch (" + std::to_string(dst.size()) +
                " vs " + std::to_string(src.size()) + ")");
  }
  table().scaled_add(dst.data(), src.data(), dst.size(), scale);
}

void axpy(std::span<double> y, std::span<const double> x, double a) {
  if (y.size() != x.size()) {
    throw Error("axpy: size mismatch (" + std::to_string(y.size()) + " vs " +
                std::to_string(x.size()) + ")");
  }
  table().axpy(y.data(), x.data(), y.size(), a);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("dot: size mismatch (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  return table().dot(a.data(), b.data(), a.size());
}

double l2_squared(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("l2_squared: size mismatch (" + std::to_string(a.size()) +
                " vs " + std::to_string(b.size()) + ")");
  }
  return table().l2_squared(a.data(), b.data(), a.size());
}

}  // namespace sslforge::kernels
