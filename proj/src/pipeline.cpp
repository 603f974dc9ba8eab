#include "intent_rnnt/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/optimizer.hpp"

namespace intent_rnnt {

void scale_grads(const ParamList& params, double factor) {
  for (const auto& p : params)
    for (double& g : p.tensor->grad()) g *= factor;
}

namespace {

// Yields batches of indices from successive seeded permutations.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed) : n_(n), batch_(batch), rng_(seed) {}

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    while (out.size() < std::min(batch_, n_)) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t k = n_; k > 1; --k) std::swap(order_[k - 1], order_[rng_.below(k)]);
    pos_ = 0;
  }

  std::size_t n_, batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace

A2IModel train_a2i(const A2IConfig& config, const TrainSettings& settings, std::span<const Utterance> train,
                   std::vector<double>* losses) {
  std::vector<const Utterance*> annotated;
  for (const auto& u : train)
    if (u.annotation()) annotated.push_back(&u);
  if (annotated.empty()) throw ArgumentError("A2I training needs annotated utterances");

  A2IModel model(config);
  const ParamList params = model.params();
  enable_grads(params);
  AdamOptimizer adam(settings.adam, params);
  BatchSampler sampler(annotated.size(), settings.batch_size, mix_seed(config.seed, hash_string("batches")));
  for (std::size_t step = 0; step < settings.steps; ++step) {
    zero_grads(params);
    const auto batch = sampler.next();
    double total = 0.0;
    for (std::size_t i : batch) total += a2i_loss(model, *annotated[i], config.objective);
    scale_grads(params, 1.0 / static_cast<double>(batch.size()));
    clip_grad_norm(params, settings.clip_norm);
    adam.step();
    if (losses) losses->push_back(total / static_cast<double>(batch.size()));
  }
  zero_grads(params);
  return model;
}

Vocabulary build_vocabulary(std::span<const Utterance> utts, std::size_t target_size) {
  std::vector<std::string> texts;
  texts.reserve(utts.size());
  for (const auto& u : utts) texts.push_back(u.transcript);
  return bpe_train(texts, target_size);
}

std::vector<RnntExample> prepare_examples(std::span<const Utterance> utts, const Vocabulary& vocab,
                                          const ConditioningPolicy& policy, const A2IModel* a2i) {
  std::vector<RnntExample> examples;
  examples.reserve(utts.size());
  for (const auto& u : utts) {
    examples.push_back({u.id, build_input(policy, u.features, a2i, u.annotation()), vocab.encode(u.transcript)});
    // The cache is not needed for training and doubles memory.
    examples.back().input.a2i_output.reset();
  }
  return examples;
}

RnntModel train_rnnt(const RnntConfig& config, const TrainSettings& settings, const AugmentPolicy& augment,
                     std::span<const RnntExample> examples, std::vector<double>* losses) {
  if (examples.empty()) throw ArgumentError("transducer training needs at least one utterance");
  RnntModel model(config);
  const ParamList params = model.params();
  enable_grads(params);
  AdamOptimizer adam(settings.adam, params);
  BatchSampler sampler(examples.size(), settings.batch_size, mix_seed(config.seed, hash_string("batches")));
  Rng augment_rng(mix_seed(config.seed, hash_string("specaugment")));
  for (std::size_t step = 0; step < settings.steps; ++step) {
    zero_grads(params);
    const auto batch = sampler.next();
    double total = 0.0;
    for (std::size_t i : batch) {
      const RnntExample& ex = examples[i];
      if (augment.enabled) {
        ConditionedUtterance noisy = ex.input;
        augment_base_columns(noisy, augment, augment_rng);
        total += model.train_loss(noisy.frames, ex.target);
      } else {
        total += model.train_loss(ex.input.frames, ex.target);
      }
    }
    scale_grads(params, 1.0 / static_cast<double>(batch.size()));
    clip_grad_norm(params, settings.clip_norm);
    adam.step();
    if (losses) losses->push_back(total / static_cast<double>(batch.size()));
  }
  zero_grads(params);
  return model;
}

std::string to_string(DecodeMode mode) { return mode == DecodeMode::kOffline ? "offline" : "streaming"; }

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "offline") return DecodeMode::kOffline;
  if (text == "streaming") return DecodeMode::kStreaming;
  throw ArgumentError("unknown decode mode '" + std::string(text) + "' (expected offline or streaming)");
}

std::vector<HypRecord> decode_dataset(const RnntModel& model, const Vocabulary& vocab, const ConditioningPolicy& policy,
                                      const A2IModel* a2i, std::span<const Utterance> utts, DecodeMode mode,
                                      std::size_t beam_width) {
  if (mode == DecodeMode::kStreaming) {
    if (!policy.streamable())
      throw ConfigError("policy " + describe(policy) + " is not streamable; decode it in offline mode");
    if (beam_width > 1) throw ArgumentError("streaming decoding supports greedy search only");
  }
  std::vector<HypRecord> hyps;
  hyps.reserve(utts.size());
  for (const auto& u : utts) {
    Hypothesis h;
    if (mode == DecodeMode::kStreaming) {
      h = streaming_decode(model, u.features, policy, a2i, u.annotation());
    } else {
      const ConditionedUtterance in = build_input(policy, u.features, a2i, u.annotation());
      h = beam_width > 1 ? beam_search(model, in.frames, beam_width).front() : greedy_decode(model, in.frames);
    }
    hyps.push_back({u.id, vocab.decode(h.tokens), h.log_prob, h.frames});
  }
  return hyps;
}

}  // namespace intent_rnnt
