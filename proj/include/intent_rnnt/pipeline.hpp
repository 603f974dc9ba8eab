#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "intent_rnnt/a2i.hpp"
#include "intent_rnnt/conditioning.hpp"
#include "intent_rnnt/config.hpp"
#include "intent_rnnt/eval.hpp"
#include "intent_rnnt/rnnt.hpp"
#include "intent_rnnt/subword.hpp"

namespace intent_rnnt {

// Multiplies every gradient buffer by `factor`.
void scale_grads(const ParamList& params, double factor);

// Minibatch Adam on the annotated utterances of `train`; batches walk a
// seeded permutation that is redrawn every epoch. `losses` receives the mean
// batch loss per step.
A2IModel train_a2i(const A2IConfig& config, const TrainSettings& settings, std::span<const Utterance> train,
                   std::vector<double>* losses = nullptr);

Vocabulary build_vocabulary(std::span<const Utterance> utts, std::size_t target_size);

struct RnntExample {
  std::string id;
  ConditionedUtterance input;
  std::vector<std::size_t> target;
};

// Runs the frozen A2I once per utterance; conditioning never changes during
// transducer training.
std::vector<RnntExample> prepare_examples(std::span<const Utterance> utts, const Vocabulary& vocab,
                                          const ConditioningPolicy& policy, const A2IModel* a2i);

// Per-utterance mean loss over each batch, global-norm clipping, Adam.
// SpecAugment (when enabled) touches only the base-feature columns.
RnntModel train_rnnt(const RnntConfig& config, const TrainSettings& settings, const AugmentPolicy& augment,
                     std::span<const RnntExample> examples, std::vector<double>* losses = nullptr);

enum class DecodeMode { kOffline, kStreaming };

std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view text);

// Streaming mode rejects non-streamable policies before looking at any
// utterance. beam_width > 1 selects beam search (offline only).
std::vector<HypRecord> decode_dataset(const RnntModel& model, const Vocabulary& vocab, const ConditioningPolicy& policy,
                                      const A2IModel* a2i, std::span<const Utterance> utts, DecodeMode mode,
                                      std::size_t beam_width = 1);

}  // namespace intent_rnnt
