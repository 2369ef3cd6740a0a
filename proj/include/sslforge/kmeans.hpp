#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sslforge {

/// A trained cluster codebook: k centroids of dimension dim, row-major.
struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;
  std::string trained_on;  // free-form provenance tag, e.g. a manifest name

  std::span<const double> centroid(std::size_t i) const {
    return {centroids.data() + i * dim, dim};
  }
};

struct KmeansOptions {
  std::size_t max_iterations = 300;
};

struct KmeansResult {
  Codebook codebook;
  /// Objective value (sum of squared distances to the assigned centroid)
  /// recorded at every assignment step. Non-increasing by construction;
  /// train_kmeans raises Error if that is ever violated.
  std::vector<double> inertia_per_iteration;
  std::size_t iterations = 0;
  bool converged = false;  // assignments stabilized before the iteration cap
};

/// Lloyd's algorithm with seeded kmeans++ initialization over a row-major
/// [n x dim] frame matrix. Fully deterministic for a given seed: ties in
/// nearest-centroid assignment go to the lowest centroid index, and empty
/// clusters are refilled with the unclaimed point farthest from its centroid
/// (lowest point index on ties). Requires n >= k >= 1.
KmeansResult train_kmeans(std::span<const double> frames, std::size_t dim,
                          std::size_t k, std::uint64_t seed,
                          const KmeansOptions& options = {});

/// Index of the centroid nearest to `frame` (squared Euclidean distance,
/// ties to the lowest index). frame.size() must equal codebook.dim.
std::size_t nearest_centroid(const Codebook& codebook,
                             std::span<const double> frame);

/// Binary codebook file (little-endian): magic "SFCB", version, k, dim,
/// provenance tag, then k*dim float64 centroid values.
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace sslforge
