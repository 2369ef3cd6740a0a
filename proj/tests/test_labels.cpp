#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sslforge/kmeans.hpp"
#include "sslforge/labels.hpp"
#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"

using namespace sslforge;

namespace {

Codebook axis_codebook() {
  Codebook cb;
  cb.k = 3;
  cb.dim = 2;
  cb.centroids = {0.0, 0.0, 1.0, 0.0, 0.0, 1.0};
  return cb;
}

FrameFeatureSequence features_of(std::vector<double> rows, std::size_t dim) {
  FrameFeatureSequence f;
  f.source_id = "u";
  f.frame_shift_ms = 20;
  f.dim = dim;
  f.data = std::move(rows);
  return f;
}

FrameLabelSequence labels_of(std::vector<std::uint32_t> labels, int shift = 20) {
  FrameLabelSequence s;
  s.source_id = "u";
  s.frame_shift_ms = shift;
  s.labels = std::move(labels);
  return s;
}

std::filesystem::path temp_dir() {
  const auto dir =
      std::filesystem::temp_directory_path() / "sslforge_labels_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("assign_labels quantizes each frame to its nearest centroid") {
  const auto cb = axis_codebook();
  const auto f = features_of(
      {
          0.1, 0.0,   // -> centroid 0
          0.9, 0.1,   // -> centroid 1
          0.1, 0.9,   // -> centroid 2
          0.5, 0.5,   // equidistant from all three -> lowest index 0
      },
      2);
  const FrameLabelSequence seq = assign_labels(f, cb);
  CHECK(seq.labels == std::vector<std::uint32_t>{0, 1, 2, 0});
  CHECK(seq.frame_shift_ms == 20);
  CHECK(seq.source_id == "u");

  const auto wrong_dim = features_of({0.1, 0.2, 0.3}, 3);
  CHECK_THROWS_AS(assign_labels(wrong_dim, cb), Error);
}

TEST_CASE("downsampling takes the majority label per group") {
  const auto fine = labels_of({0, 0, 1, 1, 1, 0, 2, 2});
  const FrameLabelSequence coarse = downsample_labels(fine, 2);
  CHECK(coarse.labels == std::vector<std::uint32_t>{0, 1, 1, 2});
  CHECK(coarse.frame_shift_ms == 40);
  CHECK(coarse.source_id == "u");
}

TEST_CASE("downsampling ties go to the label seen earliest in the group") {
  CHECK(downsample_labels(labels_of({2, 1, 1, 2}), 4).labels ==
        std::vector<std::uint32_t>{2});
  CHECK(downsample_labels(labels_of({1, 2, 2, 1}), 4).labels ==
        std::vector<std::uint32_t>{1});
  CHECK(downsample_labels(labels_of({5, 9}), 2).labels ==
        std::vector<std::uint32_t>{5});
  // Three-way count tie in a factor-4 group.
  CHECK(downsample_labels(labels_of({7, 3, 3, 7}), 2).labels ==
        std::vector<std::uint32_t>{7, 3});
}

TEST_CASE("downsampled length is ceil(frames / factor)") {
  CHECK(downsample_labels(labels_of({1, 2, 3, 4, 5}), 2).labels.size() == 3);
  CHECK(downsample_labels(labels_of({1, 2, 3, 4, 5}), 4).labels.size() == 2);
  CHECK(downsample_labels(labels_of({1}), 4).labels ==
        std::vector<std::uint32_t>{1});
  CHECK(downsample_labels(labels_of({}), 2).labels.empty());
  // 40 ms -> 80 ms via factor 2 keeps the chain consistent.
  CHECK(downsample_labels(labels_of({1, 1, 2}, 40), 2).frame_shift_ms == 80);
}

TEST_CASE("only factors 2 and 4 are meaningful for the supported grid") {
  const auto fine = labels_of({1, 2, 3, 4});
  CHECK_THROWS_AS(downsample_labels(fine, 3), Error);
  CHECK_THROWS_AS(downsample_labels(fine, 0), Error);
  CHECK_THROWS_AS(downsample_labels(fine, -2), Error);
  CHECK_THROWS_AS(downsample_labels(fine, 8), Error);
}

TEST_CASE("label sequences round-trip through jsonl") {
  std::vector<FrameLabelSequence> sequences;
  sequences.push_back(labels_of({0, 1, 2, 1}));
  auto second = labels_of({7, 7}, 40);
  second.source_id = "other";
  sequences.push_back(second);
  sequences.push_back(labels_of({}, 80));  // empty label list survives

  const auto path = temp_dir() / "labels.jsonl";
  save_labels_jsonl(sequences, path);
  const auto back = load_labels_jsonl(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0] == sequences[0]);
  CHECK(back[1] == sequences[1]);
  CHECK(back[2] == sequences[2]);
}

TEST_CASE("jsonl loading errors name the file and line") {
  const auto path = temp_dir() / "broken.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"a","frame_shift_ms":20,"labels":[1,2]})" << '\n';
    out << "{not json}\n";
  }
  try {
    load_labels_jsonl(path);
    FAIL_CHECK("expected Error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("broken.jsonl") != std::string::npos);
    CHECK(what.find(":2") != std::string::npos);
  }

  const auto missing_field = temp_dir() / "missing.jsonl";
  {
    std::ofstream out(missing_field);
    out << R"({"id":"a","labels":[1,2]})" << '\n';
  }
  CHECK_THROWS_AS(load_labels_jsonl(missing_field), Error);
  CHECK_THROWS_AS(load_labels_jsonl(temp_dir() / "nope.jsonl"), Error);
}

TEST_CASE("assignment and downsampling form a consistent multi-rate chain") {
  // End-to-end: 20 ms labels from a codebook, then 2x and 4x coarsenings
  // agree with directly coarsening in one step vs two.
  const auto cb = axis_codebook();
  std::vector<double> rows;
  Rng rng(3);
  for (int i = 0; i < 101; ++i) {
    rows.push_back(rng.uniform(-0.2, 1.2));
    rows.push_back(rng.uniform(-0.2, 1.2));
  }
  const auto f = features_of(std::move(rows), 2);
  const FrameLabelSequence l20 = assign_labels(f, cb);
  const FrameLabelSequence l40 = downsample_labels(l20, 2);
  const FrameLabelSequence l80 = downsample_labels(l20, 4);
  CHECK(l20.labels.size() == 101);
  CHECK(l40.labels.size() == 51);
  CHECK(l80.labels.size() == 26);
  CHECK(l40.frame_shift_ms == 40);
  CHECK(l80.frame_shift_ms == 80);
  // Every coarse label must appear somewhere in its source group.
  for (std::size_t g = 0; g < l80.labels.size(); ++g) {
    bool found = false;
    for (std::size_t i = g * 4; i < std::min<std::size_t>((g + 1) * 4, 101); ++i) {
      if (l20.labels[i] == l80.labels[g]) found = true;
    }
    CAPTURE(g);
    CHECK(found);
  }
}
