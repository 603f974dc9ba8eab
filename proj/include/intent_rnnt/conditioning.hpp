#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intent_rnnt/a2i.hpp"
#include "intent_rnnt/features.hpp"
#include "intent_rnnt/rnnt.hpp"

namespace intent_rnnt {

enum class ConditioningKind {
  kBaselineNone,
  kPerFrameEmbedding,
  kRepeatedFinalEmbedding,
  kPerFramePosterior,
  kOneHotOracle,
  kHybridSwitch,
};

std::string to_string(ConditioningKind kind);
ConditioningKind parse_conditioning_kind(std::string_view text);

// What gets appended to every acoustic frame before the encoder.
struct ConditioningPolicy {
  ConditioningKind kind = ConditioningKind::kBaselineNone;
  double switch_fraction = 1.0;  // hybrid only
  std::size_t conditioning_dim = 0;

  // conditioning_dim follows from the kind: 0, the A2I embedding dim, or the
  // number of intents.
  static ConditioningPolicy make(ConditioningKind kind, std::size_t embedding_dim, std::size_t num_intents,
                                 double switch_fraction = 1.0);

  bool streamable() const;
  bool needs_a2i() const;

  friend bool operator==(const ConditioningPolicy&, const ConditioningPolicy&) = default;
};

std::string describe(const ConditioningPolicy& policy);

// Hybrid policies feed e_t for frames [0, switch_frame) and e_T afterwards.
std::size_t hybrid_switch_frame(double switch_fraction, std::size_t num_frames);

struct ConditionedUtterance {
  Tensor frames;  // T x (base_dim + conditioning_dim)
  ConditioningPolicy policy;
  std::size_t base_dim = 0;
  std::optional<A2IOutput> a2i_output;
};

// The A2I model is only read; it never receives gradients from the
// transducer.
ConditionedUtterance build_input(const ConditioningPolicy& policy, const FrameSequence& fs, const A2IModel* a2i,
                                 std::optional<std::size_t> annotation);

// Applies SpecAugment to the base-feature columns only.
void augment_base_columns(ConditionedUtterance& utt, const AugmentPolicy& policy, Rng& rng);

// Records the A2I parameter checksum and verifies it later; drift is an
// IntegrityError.
class FrozenInferenceGuard {
 public:
  explicit FrozenInferenceGuard(const A2IModel& model);
  std::uint64_t checksum() const { return checksum_; }
  void verify() const;

 private:
  const A2IModel* model_;
  std::uint64_t checksum_;
};

std::uint64_t frozen_inference_guard(const A2IModel& model);

// Builds conditioned frames one at a time from a causal A2I stream.
class StreamingConditioner {
 public:
  StreamingConditioner(const ConditioningPolicy& policy, const A2IModel* a2i, std::optional<std::size_t> annotation);
  std::vector<double> next(std::span<const double> base_frame);

 private:
  ConditioningPolicy policy_;
  std::optional<A2IModel::Stream> stream_;
  std::optional<std::size_t> annotation_;
  std::size_t num_intents_ = 0;
  std::vector<double> embedding_, posterior_;
};

// Consumes base frames incrementally and keeps a greedy hypothesis current.
// Rejects non-streamable policies at construction with a ConfigError.
class StreamingDecoder {
 public:
  StreamingDecoder(const RnntModel& model, const ConditioningPolicy& policy, const A2IModel* a2i,
                   std::optional<std::size_t> annotation = std::nullopt);

  void accept_frame(std::span<const double> base_frame);
  const Hypothesis& partial() const { return search_.hypothesis(); }
  Hypothesis finish() const { return search_.hypothesis(); }
  std::size_t frames_consumed() const { return frame_; }

 private:
  StreamingConditioner conditioner_;
  RnntModel::EncoderStream encoder_;
  GreedySearch search_;
  std::size_t frame_ = 0;
};

Hypothesis streaming_decode(const RnntModel& model, const FrameSequence& fs, const ConditioningPolicy& policy,
                            const A2IModel* a2i, std::optional<std::size_t> annotation = std::nullopt);

}  // namespace intent_rnnt
