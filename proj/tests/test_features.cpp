#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/features.hpp"
#include "test_support.hpp"

using namespace intent_rnnt;

namespace {

std::vector<double> sine(double hz, double seconds, int rate, double amplitude = 0.5) {
  std::vector<double> x(static_cast<std::size_t>(seconds * rate));
  for (std::size_t n = 0; n < x.size(); ++n)
    x[n] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(n) / rate);
  return x;
}

FrameSequence ramp(std::size_t T, std::size_t D) {
  FrameSequence fs;
  fs.frames = Tensor(T, D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) fs.frames(t, d) = 100.0 * static_cast<double>(t) + static_cast<double>(d);
  return fs;
}

}  // namespace

TEST_CASE("silence gives the log floor in every cell") {
  std::vector<double> x(1600, 0.0);
  const FrameSequence fs = compute_lfbe(x, 16000);
  CHECK(fs.num_frames() == 8);
  CHECK(fs.dim() == 64);
  CHECK(fs.frame_period_ms == 10.0);
  for (double v : fs.frames.data()) CHECK(v == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("frame count follows window and hop") {
  for (std::size_t n : {400u, 401u, 559u, 560u, 16000u}) {
    std::vector<double> x(n, 0.1);
    CHECK(compute_lfbe(x, 16000).num_frames() == 1 + (n - 400) / 160);
  }
}

TEST_CASE("too-short audio and low sample rates are rejected") {
  std::vector<double> x(384, 0.0);  // 24 ms at 16 kHz
  CHECK_THROWS_AS(compute_lfbe(x, 16000), ArgumentError);
  std::vector<double> y(4000, 0.0);
  CHECK_THROWS_AS(compute_lfbe(y, 4000), ArgumentError);
}

TEST_CASE("a 1 kHz tone peaks in a filter that covers 1 kHz") {
  const int rate = 16000;
  const auto x = sine(1000.0, 0.2, rate);
  const FrameSequence fs = compute_lfbe(x, rate);

  // 64 triangles evenly spaced in mel between 0 and Nyquist; filter m spans
  // [m, m + 2] steps.
  const double step = hz_to_mel(8000.0) / 65.0;
  const double target = hz_to_mel(1000.0);
  std::vector<std::size_t> covering;
  for (std::size_t m = 0; m < 64; ++m)
    if (target > step * m && target < step * (m + 2)) covering.push_back(m);
  REQUIRE(!covering.empty());

  std::size_t first_peak = 0;
  for (std::size_t t = 0; t < fs.num_frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < 64; ++m)
      if (fs.frames(t, m) > fs.frames(t, best)) best = m;
    if (t == 0) first_peak = best;
    CHECK(best == first_peak);
    CHECK(std::find(covering.begin(), covering.end(), best) != covering.end());
  }
}

TEST_CASE("mel conversion round trips") {
  for (double hz : {0.0, 100.0, 1000.0, 7999.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-12));
  CHECK(hz_to_mel(700.0) == doctest::Approx(1127.0 * std::log(2.0)));
}

TEST_CASE("shifting audio by one hop shifts the frames by one") {
  Rng rng(5);
  std::vector<double> x(4000);
  for (double& v : x) v = rng.uniform(-0.5, 0.5);
  const FrameSequence a = compute_lfbe(x, 16000);
  const std::vector<double> shifted(x.begin() + 160, x.end());
  const FrameSequence b = compute_lfbe(shifted, 16000);
  REQUIRE(b.num_frames() == a.num_frames() - 1);
  for (std::size_t t = 0; t < b.num_frames(); ++t)
    for (std::size_t d = 0; d < 64; ++d) CHECK(std::abs(b.frames(t, d) - a.frames(t + 1, d)) < 1e-6);
}

TEST_CASE("stacking triples the dimension and the frame period") {
  FrameSequence fs = ramp(12, 64);
  const FrameSequence out = stack_downsample(fs);
  CHECK(out.dim() == 192);
  CHECK(out.num_frames() == 4);
  CHECK(out.frame_period_ms == 30.0);
}

TEST_CASE("a single frame is repeated three times") {
  const FrameSequence fs = ramp(1, 4);
  const FrameSequence out = stack_downsample(fs);
  REQUIRE(out.num_frames() == 1);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t d = 0; d < 4; ++d) CHECK(out.frames(0, j * 4 + d) == fs.frames(0, d));
}

TEST_CASE("stacked frame k ends with input frame 3k") {
  for (std::size_t T = 1; T <= 20; ++T) {
    const FrameSequence fs = ramp(T, 3);
    const FrameSequence out = stack_downsample(fs);
    CHECK(out.num_frames() == (T + 2) / 3);
    for (std::size_t k = 0; k < out.num_frames(); ++k) {
      const std::size_t t = 3 * k;
      const std::size_t srcs[3] = {t >= 2 ? t - 2 : 0, t >= 1 ? t - 1 : 0, t};
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t d = 0; d < 3; ++d) CHECK(out.frames(k, j * 3 + d) == fs.frames(srcs[j], d));
    }
  }
}

TEST_CASE("disabled augmentation is the identity") {
  Rng rng(1);
  FrameSequence fs;
  fs.frames = testing::random_tensor(30, 16, rng);
  AugmentPolicy policy;
  policy.enabled = false;
  Rng aug(3);
  CHECK(spec_augment(fs, policy, aug).frames == fs.frames);
}

TEST_CASE("a time mask alters width x D cells") {
  Rng rng(2);
  FrameSequence fs;
  fs.frames = testing::random_tensor(10, 6, rng);
  AugmentPolicy policy;
  policy.num_freq_masks = 0;
  policy.num_time_masks = 1;
  policy.max_time_width = 2;
  policy.max_time_ratio = 1.0;
  bool saw_two = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng aug(seed);
    std::vector<MaskRegion> regions;
    const FrameSequence out = spec_augment(fs, policy, aug, &regions);
    REQUIRE(regions.size() == 1);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < out.frames.size(); ++i) changed += out.frames.data()[i] != fs.frames.data()[i];
    CHECK(changed == regions[0].width * 6);
    CHECK(out.frames.rows() == 10);
    CHECK(out.frames.cols() == 6);
    saw_two = saw_two || regions[0].width == 2;
  }
  CHECK(saw_two);
}

TEST_CASE("masked cells hold the utterance mean and other cells are untouched") {
  Rng rng(4);
  FrameSequence fs;
  fs.frames = testing::random_tensor(40, 20, rng);
  double mean = 0.0;
  for (double v : fs.frames.data()) mean += v;
  mean /= static_cast<double>(fs.frames.size());
  AugmentPolicy policy;
  Rng aug(9);
  std::vector<MaskRegion> regions;
  const FrameSequence out = spec_augment(fs, policy, aug, &regions);
  for (std::size_t t = 0; t < 40; ++t)
    for (std::size_t d = 0; d < 20; ++d) {
      bool masked = false;
      for (const auto& r : regions) {
        const std::size_t pos = r.time_axis ? t : d;
        masked = masked || (pos >= r.start && pos < r.start + r.width);
      }
      CHECK(out.frames(t, d) == (masked ? mean : fs.frames(t, d)));
    }
  for (const auto& r : regions) {
    if (r.time_axis)
      CHECK(r.width <= 4);
    else
      CHECK(r.width <= 8);
  }
}

TEST_CASE("augmentation is deterministic for a seed") {
  Rng rng(6);
  FrameSequence fs;
  fs.frames = testing::random_tensor(50, 24, rng);
  AugmentPolicy policy;
  Rng a(11), b(11);
  CHECK(spec_augment(fs, policy, a).frames == spec_augment(fs, policy, b).frames);
}

TEST_CASE("WAV files round trip within 16-bit quantization") {
  const auto path = std::filesystem::temp_directory_path() / "intent_rnnt_test.wav";
  WavData wav;
  wav.sample_rate = 16000;
  wav.samples = sine(440.0, 0.05, 16000, 0.8);
  write_wav(path, wav);
  const WavData back = read_wav(path);
  std::filesystem::remove(path);
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == wav.samples.size());
  for (std::size_t i = 0; i < wav.samples.size(); ++i) CHECK(std::abs(back.samples[i] - wav.samples[i]) <= 1.0 / 32768.0);
}
