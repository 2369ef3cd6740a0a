#include <cmath>
#include <vector>

#include "doctest.h"
#include "sslforge/features.hpp"
#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"

using namespace sslforge;

namespace {

std::vector<float> sine(std::size_t n, double freq_hz, double amplitude,
                        double rate = 16000.0) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<float>(
        amplitude * std::sin(2.0 * 3.141592653589793 * freq_hz * i / rate));
  }
  return v;
}

FrameFeatureSequence make_stream(std::string id, int shift, std::size_t dim,
                                 std::vector<double> data) {
  FrameFeatureSequence s;
  s.source_id = std::move(id);
  s.frame_shift_ms = shift;
  s.dim = dim;
  s.data = std::move(data);
  return s;
}

}  // namespace

TEST_CASE("valid frame shifts are exactly 20, 40, 80") {
  CHECK(is_valid_frame_shift(20));
  CHECK(is_valid_frame_shift(40));
  CHECK(is_valid_frame_shift(80));
  CHECK(!is_valid_frame_shift(10));
  CHECK(!is_valid_frame_shift(30));
  CHECK(!is_valid_frame_shift(0));
  CHECK(!is_valid_frame_shift(-20));
}

TEST_CASE("frame count is floor(samples / shift) at every shift") {
  const auto wave = sine(16000, 440.0, 0.5);  // exactly 1 s
  for (const auto& [shift, expected] :
       std::vector<std::pair<int, std::size_t>>{{20, 50}, {40, 25}, {80, 12}}) {
    const auto f = extract_features(wave, 16000, shift, "u");
    CAPTURE(shift);
    CHECK(f.frames() == expected);
    CHECK(f.dim == 39);
    CHECK(f.frame_shift_ms == shift);
    CHECK(f.source_id == "u");
  }
  // One sample short of a frame boundary drops the partial frame.
  CHECK(extract_features(sine(16000 - 1, 440.0, 0.5), 16000, 20, "u").frames() ==
        49);
  CHECK(extract_features(sine(320, 440.0, 0.5), 16000, 20, "u").frames() == 1);
  CHECK(extract_features(sine(319, 440.0, 0.5), 16000, 20, "u").frames() == 0);
}

TEST_CASE("tail frames read past the signal as silence, not garbage") {
  // 400-sample analysis windows; the last 20 ms frame of a 640-sample clip
  // starts at 320 and needs samples up to 720, which only exist as padding.
  const auto wave = sine(640, 440.0, 0.5);
  const auto f = extract_features(wave, 16000, 20, "u");
  REQUIRE(f.frames() == 2);
  for (double v : f.data) {
    CHECK(std::isfinite(v));
  }
  // Deterministic: same input, same bytes.
  const auto again = extract_features(wave, 16000, 20, "u");
  CHECK(f.data == again.data);
}

TEST_CASE("louder signals raise the energy cepstrum") {
  const auto soft = extract_features(sine(16000, 440.0, 0.01), 16000, 20, "u");
  const auto loud = extract_features(sine(16000, 440.0, 0.8), 16000, 20, "u");
  REQUIRE(soft.frames() == loud.frames());
  double soft_c0 = 0.0, loud_c0 = 0.0;
  for (std::size_t t = 0; t < soft.frames(); ++t) {
    soft_c0 += soft.frame(t)[0];
    loud_c0 += loud.frame(t)[0];
  }
  CHECK(loud_c0 > soft_c0);
}

TEST_CASE("different tones produce different features") {
  const auto a = extract_features(sine(8000, 200.0, 0.5), 16000, 20, "u");
  const auto b = extract_features(sine(8000, 3000.0, 0.5), 16000, 20, "u");
  REQUIRE(a.frames() == b.frames());
  CHECK(a.data != b.data);
}

TEST_CASE("silence produces finite features thanks to the log floor") {
  const auto f =
      extract_features(std::vector<float>(1600, 0.0f), 16000, 20, "u");
  REQUIRE(f.frames() == 5);
  for (double v : f.data) CHECK(std::isfinite(v));
}

TEST_CASE("extraction rejects unsupported rates and shifts") {
  const auto wave = sine(8000, 440.0, 0.5);
  CHECK_THROWS_AS(extract_features(wave, 8000, 20, "u"), Error);
  CHECK_THROWS_AS(extract_features(wave, 44100, 20, "u"), Error);
  CHECK_THROWS_AS(extract_features(wave, 16000, 30, "u"), Error);
  CHECK_THROWS_AS(extract_features(wave, 16000, 0, "u"), Error);
}

TEST_CASE("fuse_multires repeats coarse rows to the finest grid") {
  // Hand-built streams make the repeat/truncate rules directly checkable.
  const auto f20 = make_stream("u", 20, 2, {0, 1, 10, 11, 20, 21, 30, 31, 40, 41});
  const auto f40 = make_stream("u", 40, 1, {100, 200, 300});
  const auto f80 = make_stream("u", 80, 1, {1000, 2000});
  const std::vector<FrameFeatureSequence> streams = {f20, f40, f80};
  const auto fused = fuse_multires(streams);
  CHECK(fused.frame_shift_ms == 20);
  CHECK(fused.dim == 4);
  REQUIRE(fused.frames() == 5);
  // Row t: [f20 row t, f40 row t/2, f80 row t/4] with end rows repeated.
  const std::vector<std::vector<double>> expected = {
      {0, 1, 100, 1000},
      {10, 11, 100, 1000},
      {20, 21, 200, 1000},
      {30, 31, 200, 1000},
      {40, 41, 300, 2000},
  };
  for (std::size_t t = 0; t < 5; ++t) {
    const auto row = fused.frame(t);
    for (std::size_t d = 0; d < 4; ++d) {
      CAPTURE(t);
      CAPTURE(d);
      CHECK(row[d] == expected[t][d]);
    }
  }
}

TEST_CASE("fuse_multires truncates a coarse stream that runs long") {
  // 40 ms stream with more rows than ceil(T20/2) = 2: extra rows never appear.
  const auto f20 = make_stream("u", 20, 1, {0, 1, 2});
  const auto f40 = make_stream("u", 40, 1, {10, 20, 30, 40});
  const auto fused = fuse_multires(std::vector<FrameFeatureSequence>{f20, f40});
  REQUIRE(fused.frames() == 3);
  CHECK(fused.frame(0)[1] == 10);
  CHECK(fused.frame(1)[1] == 10);
  CHECK(fused.frame(2)[1] == 20);  // rows 30, 40 are unused
}

TEST_CASE("fuse_multires concatenates columns in input order") {
  const auto f20 = make_stream("u", 20, 1, {1, 2});
  const auto f40 = make_stream("u", 40, 1, {7});
  const auto ab = fuse_multires(std::vector<FrameFeatureSequence>{f20, f40});
  const auto ba = fuse_multires(std::vector<FrameFeatureSequence>{f40, f20});
  CHECK(ab.frame(0)[0] == 1);
  CHECK(ab.frame(0)[1] == 7);
  CHECK(ba.frame(0)[0] == 7);
  CHECK(ba.frame(0)[1] == 1);
  CHECK(ba.frame_shift_ms == 20);  // finest wins regardless of order
}

TEST_CASE("fuse_multires validates sources, shifts, and emptiness") {
  const auto f20 = make_stream("u", 20, 1, {1, 2});
  CHECK_THROWS_AS(fuse_multires({}), Error);

  auto other = make_stream("v", 40, 1, {7});
  CHECK_THROWS_AS(
      fuse_multires(std::vector<FrameFeatureSequence>{f20, other}), Error);

  auto odd = make_stream("u", 30, 1, {7});
  CHECK_THROWS_AS(fuse_multires(std::vector<FrameFeatureSequence>{f20, odd}),
                  Error);

  auto empty40 = make_stream("u", 40, 1, {});
  CHECK_THROWS_AS(
      fuse_multires(std::vector<FrameFeatureSequence>{f20, empty40}), Error);

  // All-empty input is fine: zero frames, combined dim.
  auto empty20 = make_stream("u", 20, 2, {});
  auto empty80 = make_stream("u", 80, 3, {});
  const auto fused =
      fuse_multires(std::vector<FrameFeatureSequence>{empty20, empty80});
  CHECK(fused.frames() == 0);
  CHECK(fused.dim == 5);
}

TEST_CASE("fused extraction lines up with per-shift extraction") {
  const auto wave = sine(16000, 700.0, 0.4);
  const auto f20 = extract_features(wave, 16000, 20, "u");
  const auto f40 = extract_features(wave, 16000, 40, "u");
  const auto fused =
      fuse_multires(std::vector<FrameFeatureSequence>{f20, f40});
  REQUIRE(fused.frames() == f20.frames());
  REQUIRE(fused.dim == 78);
  // Spot-check: row 3 = [f20 row 3, f40 row 1].
  for (std::size_t d = 0; d < 39; ++d) {
    CHECK(fused.frame(3)[d] == f20.frame(3)[d]);
    CHECK(fused.frame(3)[39 + d] == f40.frame(1)[d]);
  }
}
