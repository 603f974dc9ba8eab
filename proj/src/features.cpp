#include "intent_rnnt/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// num_filters x (fft_size/2 + 1) triangular weights on the mel scale.
std::vector<std::vector<double>> mel_bank(std::size_t num_filters, std::size_t fft_size, int sample_rate,
                                          double low_hz, double high_hz) {
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_low = hz_to_mel(low_hz);
  const double mel_high = hz_to_mel(high_hz);
  const double mel_step = (mel_high - mel_low) / static_cast<double>(num_filters + 1);
  std::vector<std::vector<double>> bank(num_filters, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < num_filters; ++m) {
    const double left = mel_low + mel_step * static_cast<double>(m);
    const double center = left + mel_step;
    const double right = center + mel_step;
    for (std::size_t k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / static_cast<double>(fft_size));
      if (mel > left && mel < right)
        bank[m][k] = mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
    }
  }
  return bank;
}

}  // namespace

FrameSequence compute_lfbe(std::span<const double> samples, int sample_rate, const LfbeOptions& options) {
  if (sample_rate < 8000) throw ArgumentError("sample rate must be at least 8 kHz");
  const auto window = static_cast<std::size_t>(std::lround(options.window_ms * sample_rate / 1000.0));
  const auto hop = static_cast<std::size_t>(std::lround(options.shift_ms * sample_rate / 1000.0));
  if (samples.size() < window) {
    std::ostringstream msg;
    msg << "audio has " << samples.size() << " samples, fewer than one " << options.window_ms << " ms window ("
        << window << " samples)";
    throw ArgumentError(msg.str());
  }
  const double high = options.high_freq_hz > 0 ? options.high_freq_hz : sample_rate / 2.0;
  const std::size_t fft_size = next_pow2(window);
  const auto bank = mel_bank(options.num_filters, fft_size, sample_rate, options.low_freq_hz, high);

  std::vector<double> hann(window);
  for (std::size_t n = 0; n < window; ++n)
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(window - 1));

  const std::size_t num_frames = 1 + (samples.size() - window) / hop;
  FrameSequence fs;
  fs.frames = Tensor(num_frames, options.num_filters);
  fs.frame_period_ms = options.shift_ms;
  fs.source = FeatureSource::kRealAudio;

  Eigen::FFT<double> fft;
  std::vector<double> buf(fft_size);
  std::vector<std::complex<double>> spec;
  std::vector<double> mag(fft_size / 2 + 1);
  for (std::size_t t = 0; t < num_frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t n = 0; n < window; ++n) buf[n] = samples[t * hop + n] * hann[n];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]);
    auto out = fs.frames.row(t);
    for (std::size_t m = 0; m < options.num_filters; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < mag.size(); ++k) e += bank[m][k] * mag[k];
      out[m] = std::log(std::max(e, options.energy_floor));
    }
  }
  return fs;
}

FrameSequence stack_downsample(const FrameSequence& fs, std::size_t left_context, std::size_t factor) {
  if (fs.num_frames() == 0) throw ArgumentError("cannot stack an empty frame sequence");
  if (factor == 0) throw ArgumentError("downsampling factor must be positive");
  const std::size_t T = fs.num_frames();
  const std::size_t D = fs.dim();
  const std::size_t out_frames = (T + factor - 1) / factor;
  FrameSequence out;
  out.frames = Tensor(out_frames, D * (left_context + 1));
  out.frame_period_ms = fs.frame_period_ms * static_cast<double>(factor);
  out.source = fs.source;
  for (std::size_t k = 0; k < out_frames; ++k) {
    const std::size_t t = k * factor;
    auto dst = out.frames.row(k);
    for (std::size_t j = 0; j <= left_context; ++j) {
      const std::size_t offset = left_context - j;
      const std::size_t src = t >= offset ? t - offset : 0;
      std::copy(fs.frames.row(src).begin(), fs.frames.row(src).end(), dst.begin() + static_cast<std::ptrdiff_t>(j * D));
    }
  }
  return out;
}

FrameSequence spec_augment(const FrameSequence& fs, const AugmentPolicy& policy, Rng& rng,
                           std::vector<MaskRegion>* applied) {
  if (!policy.enabled) return fs;
  const std::size_t T = fs.num_frames();
  const std::size_t D = fs.dim();
  if (T == 0 || D == 0) return fs;
  if (policy.num_freq_masks > 0 && policy.max_freq_width >= D)
    throw ArgumentError("frequency mask width must be smaller than the feature dimension");

  double mean = 0.0;
  for (double v : fs.frames.data()) mean += v;
  mean /= static_cast<double>(fs.frames.size());

  FrameSequence out = fs;
  for (std::size_t m = 0; m < policy.num_freq_masks; ++m) {
    const std::size_t width = rng.below(policy.max_freq_width + 1);
    const std::size_t start = rng.below(D - width + 1);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = start; d < start + width; ++d) out.frames(t, d) = mean;
    if (applied) applied->push_back({false, start, width});
  }
  const auto ratio_cap = static_cast<std::size_t>(std::floor(policy.max_time_ratio * static_cast<double>(T)));
  const std::size_t max_width = std::min({policy.max_time_width, ratio_cap, T > 0 ? T - 1 : 0});
  for (std::size_t m = 0; m < policy.num_time_masks; ++m) {
    const std::size_t width = rng.below(max_width + 1);
    const std::size_t start = rng.below(T - width + 1);
    for (std::size_t t = start; t < start + width; ++t)
      for (std::size_t d = 0; d < D; ++d) out.frames(t, d) = mean;
    if (applied) applied->push_back({true, start, width});
  }
  return out;
}

namespace {

std::uint32_t le32(const char* p) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

std::uint16_t le16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) | static_cast<unsigned char>(p[1]) << 8);
}

void put_le(std::ostream& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw ParseError("'" + path.string() + "' is not a RIFF/WAVE file");
  WavData wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw ParseError("truncated wav chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("wav fmt chunk too short");
      const std::uint16_t format = le16(bytes.data() + body);
      const std::uint16_t channels = le16(bytes.data() + body + 2);
      wav.sample_rate = static_cast<int>(le32(bytes.data() + body + 4));
      const std::uint16_t bits = le16(bytes.data() + body + 14);
      if (format != 1 || channels != 1 || bits != 16)
        throw ParseError("only 16-bit mono PCM wav is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("wav data chunk before fmt chunk");
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i)
        wav.samples[i] = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i)) / 32768.0;
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw ParseError("wav file has no data chunk");
}

void write_wav(const std::filesystem::path& path, const WavData& wav) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
  out.write("RIFF", 4);
  put_le(out, 36 + data_bytes, 4);
  out.write("WAVEfmt ", 8);
  put_le(out, 16, 4);
  put_le(out, 1, 2);
  put_le(out, 1, 2);
  put_le(out, static_cast<std::uint32_t>(wav.sample_rate), 4);
  put_le(out, static_cast<std::uint32_t>(wav.sample_rate * 2), 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  out.write("data", 4);
  put_le(out, data_bytes, 4);
  for (double s : wav.samples) {
    const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    put_le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32768.0))), 2);
  }
}

}  // namespace intent_rnnt
