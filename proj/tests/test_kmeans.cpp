#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"
#include "sslforge/kmeans.hpp"
#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"

using namespace sslforge;

namespace {

std::vector<double> random_points(std::size_t n, std::size_t dim,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> data(n * dim);
  for (auto& x : data) x = rng.uniform(-1.0, 1.0);
  return data;
}

// Three well-separated clusters around fixed centers.
std::vector<double> clustered_points(std::size_t per_cluster, std::uint64_t seed) {
  const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  Rng rng(seed);
  std::vector<double> data;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      data.push_back(centers[c][0] + rng.uniform(-0.5, 0.5));
      data.push_back(centers[c][1] + rng.uniform(-0.5, 0.5));
    }
  }
  return data;
}

std::size_t brute_force_nearest(const Codebook& cb, std::span<const double> p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cb.k; ++c) {
    double d = 0.0;
    for (std::size_t j = 0; j < cb.dim; ++j) {
      const double diff = p[j] - cb.centroids[c * cb.dim + j];
      d += diff * diff;
    }
    if (d < best_d) {  // strict: keeps the lowest index on ties
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("inertia is non-increasing and training converges on easy data") {
  const auto data = clustered_points(50, 1);
  const KmeansResult result = train_kmeans(data, 2, 3, 7);
  CHECK(result.converged);
  CHECK(result.codebook.k == 3);
  CHECK(result.codebook.dim == 2);
  REQUIRE(!result.inertia_per_iteration.empty());
  for (std::size_t i = 1; i < result.inertia_per_iteration.size(); ++i) {
    CHECK(result.inertia_per_iteration[i] <=
          result.inertia_per_iteration[i - 1]);
  }
  // Well-separated clusters: every learned centroid sits near one center.
  const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  for (std::size_t c = 0; c < 3; ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& center : centers) {
      const double dx = result.codebook.centroids[c * 2] - center[0];
      const double dy = result.codebook.centroids[c * 2 + 1] - center[1];
      best = std::min(best, dx * dx + dy * dy);
    }
    CHECK(best < 0.25);
  }
}

TEST_CASE("training is a pure function of data and seed") {
  const auto data = random_points(300, 4, 5);
  const KmeansResult a = train_kmeans(data, 4, 6, 99);
  const KmeansResult b = train_kmeans(data, 4, 6, 99);
  CHECK(a.codebook.centroids == b.codebook.centroids);
  CHECK(a.inertia_per_iteration == b.inertia_per_iteration);
  CHECK(a.iterations == b.iterations);
  const KmeansResult c = train_kmeans(data, 4, 6, 100);
  CHECK(c.codebook.centroids != a.codebook.centroids);
}

TEST_CASE("nearest_centroid matches brute force over random instances") {
  Rng rng(33);
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t n = 20 + rng.below(180);
    const std::size_t dim = 1 + rng.below(5);
    const std::size_t k = 2 + rng.below(7);
    const auto data = random_points(n, dim, derive_seed(44, instance));
    const KmeansResult result =
        train_kmeans(data, dim, std::min(k, n), derive_seed(55, instance));
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> p(data.data() + i * dim, dim);
      CHECK(nearest_centroid(result.codebook, p) ==
            brute_force_nearest(result.codebook, p));
    }
  }
}

TEST_CASE("exact ties pick the lowest centroid index") {
  Codebook cb;
  cb.k = 3;
  cb.dim = 1;
  cb.centroids = {1.0, -1.0, 1.0};  // centroids 0 and 2 coincide
  CHECK(nearest_centroid(cb, std::vector<double>{0.9}) == 0);
  CHECK(nearest_centroid(cb, std::vector<double>{0.0}) == 0);  // 3-way tie
  CHECK(nearest_centroid(cb, std::vector<double>{-0.6}) == 1);
}

TEST_CASE("k larger than distinct points still yields k centroids") {
  // 4 distinct points, k = 4, but duplicates force empty-cluster handling.
  std::vector<double> data = {0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0};
  const KmeansResult result = train_kmeans(data, 2, 4, 3);
  CHECK(result.codebook.k == 4);
  // Each point becomes its own centroid; inertia reaches zero.
  CHECK(result.inertia_per_iteration.back() == 0.0);
}

TEST_CASE("duplicate-heavy data keeps every cluster non-empty") {
  // 97 copies of one point plus 3 others; k-means++ with duplicates can seed
  // coincident centroids, which Lloyd must then repair deterministically.
  std::vector<double> data;
  for (int i = 0; i < 97; ++i) data.push_back(5.0);
  data.push_back(0.0);
  data.push_back(1.0);
  data.push_back(9.0);
  const KmeansResult result = train_kmeans(data, 1, 4, 11);
  std::vector<std::size_t> counts(4, 0);
  Codebook cb = result.codebook;
  for (double x : data) {
    counts[nearest_centroid(cb, std::span<const double>(&x, 1))] += 1;
  }
  for (std::size_t c = 0; c < 4; ++c) {
    CAPTURE(c);
    CHECK(counts[c] > 0);
  }
}

TEST_CASE("invalid instances are rejected") {
  const auto data = random_points(10, 2, 1);
  CHECK_THROWS_AS(train_kmeans(data, 0, 2, 1), Error);       // dim 0
  CHECK_THROWS_AS(train_kmeans(data, 3, 2, 1), Error);       // not divisible
  CHECK_THROWS_AS(train_kmeans(data, 2, 0, 1), Error);       // k 0
  CHECK_THROWS_AS(train_kmeans(data, 2, 11, 1), Error);      // k > n
  CHECK_THROWS_AS(train_kmeans({}, 2, 1, 1), Error);         // empty
  Codebook cb;
  cb.k = 1;
  cb.dim = 2;
  cb.centroids = {0.0, 0.0};
  CHECK_THROWS_AS(nearest_centroid(cb, std::vector<double>{1.0}), Error);
}

TEST_CASE("the iteration cap is honored") {
  const auto data = random_points(500, 3, 8);
  KmeansOptions opts;
  opts.max_iterations = 2;
  const KmeansResult result = train_kmeans(data, 3, 10, 13, opts);
  CHECK(result.iterations <= 2);
}

TEST_CASE("codebooks round-trip through their binary format") {
  const auto data = clustered_points(30, 21);
  KmeansResult result = train_kmeans(data, 2, 3, 5);
  result.codebook.trained_on = "unit-test fixture";
  const auto dir =
      std::filesystem::temp_directory_path() / "sslforge_kmeans_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / "codebook.bin";
  save_codebook(result.codebook, path);
  const Codebook back = load_codebook(path);
  CHECK(back.k == result.codebook.k);
  CHECK(back.dim == result.codebook.dim);
  CHECK(back.centroids == result.codebook.centroids);  // bit-exact
  CHECK(back.trained_on == result.codebook.trained_on);

  CHECK_THROWS_AS(load_codebook(dir / "missing.bin"), Error);
}

TEST_CASE("a truncated codebook file is rejected") {
  const auto dir =
      std::filesystem::temp_directory_path() / "sslforge_kmeans_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / "trunc.bin";
  Codebook cb;
  cb.k = 2;
  cb.dim = 2;
  cb.centroids = {1.0, 2.0, 3.0, 4.0};
  save_codebook(cb, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 9);
  CHECK_THROWS_AS(load_codebook(path), Error);
}
