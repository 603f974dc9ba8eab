#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "intent_rnnt/random.hpp"
#include "intent_rnnt/tensor.hpp"

namespace intent_rnnt {

enum class FeatureSource { kRealAudio, kSynthetic };

struct FrameSequence {
  Tensor frames;  // T x D
  double frame_period_ms = 10.0;
  FeatureSource source = FeatureSource::kRealAudio;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

struct LfbeOptions {
  std::size_t num_filters = 64;
  double window_ms = 25.0;
  double shift_ms = 10.0;
  double low_freq_hz = 0.0;
  double high_freq_hz = 0.0;  // 0 means Nyquist
  double energy_floor = 1e-10;
};

// Hann-windowed magnitude spectrum -> mel triangular filters -> natural log
// with floor. FFT size is the next power of two >= window length.
FrameSequence compute_lfbe(std::span<const double> samples, int sample_rate, const LfbeOptions& options = {});

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Stacks each frame with `left_context` preceding frames (edge-padded by
// repeating frame 0) and keeps every `factor`-th stacked frame.
FrameSequence stack_downsample(const FrameSequence& fs, std::size_t left_context = 2, std::size_t factor = 3);

struct AugmentPolicy {
  bool enabled = true;
  std::size_t num_freq_masks = 1;
  std::size_t max_freq_width = 8;
  std::size_t num_time_masks = 1;
  std::size_t max_time_width = 10;
  // Time mask width is additionally capped at floor(max_time_ratio * T).
  double max_time_ratio = 0.1;
};

struct MaskRegion {
  bool time_axis = false;
  std::size_t start = 0;
  std::size_t width = 0;
};

// Masked cells are set to the mean over the whole utterance. Widths are
// drawn uniformly from [0, max]. Appends the drawn regions to `applied`.
FrameSequence spec_augment(const FrameSequence& fs, const AugmentPolicy& policy, Rng& rng,
                           std::vector<MaskRegion>* applied = nullptr);

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // scaled to [-1, 1)
};

// 16-bit little-endian PCM, mono.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const WavData& wav);

}  // namespace intent_rnnt
