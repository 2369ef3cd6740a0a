#include "sslforge/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "sslforge/kernels.hpp"
#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"

namespace sslforge {
namespace {

constexpr char kCodebookMagic[4] = {'S', 'F', 'C', 'B'};
constexpr std::uint32_t kCodebookVersion = 1;

std::span<const double> row(std::span<const double> data, std::size_t dim,
                            std::size_t i) {
  return data.subspan(i * dim, dim);
}

}  // namespace

std::size_t nearest_centroid(const Codebook& codebook,
                             std::span<const double> frame) {
  if (codebook.k == 0) {
    throw Error("nearest_centroid: empty codebook");
  }
  if (frame.size() != codebook.dim) {
    throw Error("nearest_centroid: frame dim " + std::to_string(frame.size()) +
                " does not match codebook dim " + std::to_string(codebook.dim));
  }
  std::size_t best = 0;
  double best_d = kernels::l2_squared(frame, codebook.centroid(0));
  for (std::size_t c = 1; c < codebook.k; ++c) {
    const double d = kernels::l2_squared(frame, codebook.centroid(c));
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = c;
    }
  }
  return best;
}

KmeansResult train_kmeans(std::span<const double> frames, std::size_t dim,
                          std::size_t k, std::uint64_t seed,
                          const KmeansOptions& options) {
  if (dim == 0) throw Error("train_kmeans: dim must be positive");
  if (frames.size() % dim != 0) {
    throw Error("train_kmeans: frame buffer size " +
                std::to_string(frames.size()) +
                " is not a multiple of dim " + std::to_string(dim));
  }
  const std::size_t n = frames.size() / dim;
  if (k == 0) throw Error("train_kmeans: k must be positive");
  if (n < k) {
    throw Error("train_kmeans: need at least k=" + std::to_string(k) +
                " frames, got " + std::to_string(n));
  }
  if (options.max_iterations == 0) {
    throw Error("train_kmeans: max_iterations must be positive");
  }

  Rng rng(seed);
  KmeansResult result;
  Codebook& cb = result.codebook;
  cb.k = k;
  cb.dim = dim;
  cb.centroids.resize(k * dim);

  // kmeans++ seeding: first centroid uniform, the rest weighted by squared
  // distance to the nearest chosen centroid.
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = rng.below(n);
    std::copy_n(row(frames, dim, first).data(), dim, cb.centroids.data());
  }
  for (std::size_t c = 1; c < k; ++c) {
    const std::span<const double> prev{cb.centroids.data() + (c - 1) * dim, dim};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], kernels::l2_squared(row(frames, dim, i), prev));
      total += min_d2[i];
    }
    std::size_t pick;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += min_d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    } else {
      // Every frame coincides with a chosen centroid; any pick is as good.
      pick = rng.below(n);
    }
    std::copy_n(row(frames, dim, pick).data(), dim,
                cb.centroids.data() + c * dim);
  }

  std::vector<std::size_t> assignment(n, k);
  std::vector<std::size_t> previous(n, k + 1);
  std::vector<double> point_d2(n, 0.0);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    // Assignment step plus the objective it achieves.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = row(frames, dim, i);
      std::size_t best = 0;
      double best_d = kernels::l2_squared(x, cb.centroid(0));
      for (std::size_t c = 1; c < k; ++c) {
        const double d = kernels::l2_squared(x, cb.centroid(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assignment[i] = best;
      point_d2[i] = best_d;
      inertia += best_d;
    }
    if (!result.inertia_per_iteration.empty()) {
      const double prev_inertia = result.inertia_per_iteration.back();
      if (inertia > prev_inertia * (1.0 + 1e-12) + 1e-12) {
        throw Error("train_kmeans: objective increased between iterations (" +
                    std::to_string(prev_inertia) + " -> " +
                    std::to_string(inertia) + ")");
      }
    }
    result.inertia_per_iteration.push_back(inertia);
    result.iterations = iter + 1;

    if (assignment == previous) {
      result.converged = true;
      break;
    }
    previous = assignment;

    // Update step.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = row(frames, dim, i);
      kernels::axpy({sums.data() + assignment[i] * dim, dim}, x, 1.0);
      counts[assignment[i]] += 1;
    }
    // Refill empty clusters deterministically with the unclaimed point
    // farthest from its assigned centroid (lowest index on ties).
    std::vector<bool> stolen(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (stolen[i] || counts[assignment[i]] <= 1) continue;
        if (point_d2[i] > far_d) {
          far_d = point_d2[i];
          far = i;
        }
      }
      if (far == n) {
        throw Error("train_kmeans: cannot refill empty cluster " +
                    std::to_string(c));
      }
      stolen[far] = true;
      const auto x = row(frames, dim, far);
      kernels::axpy({sums.data() + assignment[far] * dim, dim}, x, -1.0);
      counts[assignment[far]] -= 1;
      std::copy_n(x.data(), dim, sums.data() + c * dim);
      counts[c] = 1;
      assignment[far] = c;
      point_d2[far] = 0.0;
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t d = 0; d < dim; ++d) {
        cb.centroids[c * dim + d] = sums[c * dim + d] * inv;
      }
    }
  }
  return result;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  if (codebook.k == 0 || codebook.dim == 0 ||
      codebook.centroids.size() != codebook.k * codebook.dim) {
    throw Error("save_codebook: inconsistent codebook shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write codebook: " + path.string());
  }
  out.write(kCodebookMagic, 4);
  auto write_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  write_u32(kCodebookVersion);
  write_u32(static_cast<std::uint32_t>(codebook.k));
  write_u32(static_cast<std::uint32_t>(codebook.dim));
  write_u32(static_cast<std::uint32_t>(codebook.trained_on.size()));
  out.write(codebook.trained_on.data(),
            static_cast<std::streamsize>(codebook.trained_on.size()));
  out.write(reinterpret_cast<const char*>(codebook.centroids.data()),
            static_cast<std::streamsize>(codebook.centroids.size() * 8));
  if (!out) {
    throw Error("short write to codebook: " + path.string());
  }
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open codebook: " + path.string());
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCodebookMagic, 4) != 0) {
    throw Error("not a codebook file: " + path.string());
  }
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint32_t version = read_u32();
  if (version != kCodebookVersion) {
    throw Error("unsupported codebook version " + std::to_string(version) +
                " in " + path.string());
  }
  Codebook cb;
  cb.k = read_u32();
  cb.dim = read_u32();
  const std::uint32_t name_len = read_u32();
  if (!in) {
    throw Error("truncated codebook header: " + path.string());
  }
  cb.trained_on.resize(name_len);
  in.read(cb.trained_on.data(), name_len);
  cb.centroids.resize(cb.k * cb.dim);
  in.read(reinterpret_cast<char*>(cb.centroids.data()),
          static_cast<std::streamsize>(cb.centroids.size() * 8));
  if (!in || in.gcount() != static_cast<std::streamsize>(cb.centroids.size() * 8)) {
    throw Error("truncated codebook data: " + path.string());
  }
  return cb;
}

}  // namespace sslforge
