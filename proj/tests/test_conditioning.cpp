#include <doctest.h>

#include <cmath>
#include <vector>

#include "intent_rnnt/conditioning.hpp"
#include "intent_rnnt/config.hpp"
#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/pipeline.hpp"
#include "test_support.hpp"

using namespace intent_rnnt;

namespace {

constexpr std::size_t kBase = 6;
constexpr std::size_t kEmb = 3;
constexpr std::size_t kIntents = 4;

A2IModel small_a2i() {
  A2IConfig c;
  c.input_dim = kBase;
  c.num_intents = kIntents;
  c.lstm_units = 5;
  c.embedding_dim = kEmb;
  c.seed = 17;
  return A2IModel(c);
}

FrameSequence random_frames(std::size_t T, Rng& rng) {
  FrameSequence fs;
  fs.frames = testing::random_tensor(T, kBase, rng);
  fs.source = FeatureSource::kSynthetic;
  return fs;
}

std::vector<ConditioningPolicy> all_policies() {
  std::vector<ConditioningPolicy> out;
  for (auto kind : {ConditioningKind::kBaselineNone, ConditioningKind::kPerFrameEmbedding,
                    ConditioningKind::kRepeatedFinalEmbedding, ConditioningKind::kPerFramePosterior,
                    ConditioningKind::kOneHotOracle})
    out.push_back(ConditioningPolicy::make(kind, kEmb, kIntents));
  for (double p : {0.0, 0.3, 0.5, 0.7, 1.0})
    out.push_back(ConditioningPolicy::make(ConditioningKind::kHybridSwitch, kEmb, kIntents, p));
  return out;
}

}  // namespace

TEST_CASE("conditioning widths and streamability follow the kind") {
  CHECK(ConditioningPolicy::make(ConditioningKind::kBaselineNone, 64, 8).conditioning_dim == 0);
  CHECK(ConditioningPolicy::make(ConditioningKind::kPerFrameEmbedding, 64, 8).conditioning_dim == 64);
  CHECK(ConditioningPolicy::make(ConditioningKind::kRepeatedFinalEmbedding, 64, 8).conditioning_dim == 64);
  CHECK(ConditioningPolicy::make(ConditioningKind::kHybridSwitch, 64, 8, 0.5).conditioning_dim == 64);
  CHECK(ConditioningPolicy::make(ConditioningKind::kPerFramePosterior, 64, 8).conditioning_dim == 8);
  CHECK(ConditioningPolicy::make(ConditioningKind::kOneHotOracle, 64, 8).conditioning_dim == 8);

  CHECK(ConditioningPolicy::make(ConditioningKind::kPerFrameEmbedding, 64, 8).streamable());
  CHECK(ConditioningPolicy::make(ConditioningKind::kPerFramePosterior, 64, 8).streamable());
  CHECK(ConditioningPolicy::make(ConditioningKind::kOneHotOracle, 64, 8).streamable());
  CHECK(ConditioningPolicy::make(ConditioningKind::kBaselineNone, 64, 8).streamable());
  CHECK(!ConditioningPolicy::make(ConditioningKind::kRepeatedFinalEmbedding, 64, 8).streamable());
  CHECK(!ConditioningPolicy::make(ConditioningKind::kHybridSwitch, 64, 8, 0.7).streamable());
  CHECK(ConditioningPolicy::make(ConditioningKind::kHybridSwitch, 64, 8, 1.0).streamable());
  CHECK_THROWS_AS(ConditioningPolicy::make(ConditioningKind::kHybridSwitch, 64, 8, 1.5), ConfigError);

  for (const auto& p : all_policies()) CHECK(parse_conditioning_kind(to_string(p.kind)) == p.kind);
  CHECK_THROWS_AS(parse_conditioning_kind("per_frame_everything"), ConfigError);
}

TEST_CASE("stacked features plus a 64-dim embedding give 256-dim frames") {
  A2IConfig c;
  c.input_dim = 192;
  c.embedding_dim = 64;
  c.lstm_units = 8;
  const A2IModel a2i(c);
  Rng rng(1);
  FrameSequence fs;
  fs.frames = testing::random_tensor(4, 192, rng);
  const auto policy = ConditioningPolicy::make(ConditioningKind::kPerFrameEmbedding, 64, 8);
  CHECK(build_input(policy, fs, &a2i, std::nullopt).frames.cols() == 256);
}

TEST_CASE("appended blocks match the A2I outputs for each kind") {
  const A2IModel a2i = small_a2i();
  Rng rng(2);
  const FrameSequence fs = random_frames(9, rng);
  const A2IOutput out = a2i.forward(fs);
  for (const auto& policy : all_policies()) {
    const ConditionedUtterance cu = build_input(policy, fs, &a2i, 2);
    REQUIRE(cu.frames.rows() == 9);
    REQUIRE(cu.frames.cols() == kBase + policy.conditioning_dim);
    for (std::size_t t = 0; t < 9; ++t) {
      for (std::size_t d = 0; d < kBase; ++d) CHECK(cu.frames(t, d) == fs.frames(t, d));
      for (std::size_t j = 0; j < policy.conditioning_dim; ++j) {
        double expected = 0.0;
        switch (policy.kind) {
          case ConditioningKind::kBaselineNone: break;
          case ConditioningKind::kPerFrameEmbedding: expected = out.embeddings(t, j); break;
          case ConditioningKind::kRepeatedFinalEmbedding: expected = out.final_embedding[j]; break;
          case ConditioningKind::kPerFramePosterior: expected = out.posteriors(t, j); break;
          case ConditioningKind::kOneHotOracle: expected = j == 2 ? 1.0 : 0.0; break;
          case ConditioningKind::kHybridSwitch: {
            const auto boundary = static_cast<std::size_t>(std::ceil(policy.switch_fraction * 9));
            expected = t < boundary ? out.embeddings(t, j) : out.final_embedding[j];
            break;
          }
        }
        CHECK(cu.frames(t, kBase + j) == expected);
      }
    }
  }
}

TEST_CASE("one-hot conditioning is all zeros without an annotation") {
  Rng rng(3);
  const FrameSequence fs = random_frames(5, rng);
  const auto policy = ConditioningPolicy::make(ConditioningKind::kOneHotOracle, kEmb, kIntents);
  const ConditionedUtterance none = build_input(policy, fs, nullptr, std::nullopt);
  const ConditionedUtterance some = build_input(policy, fs, nullptr, 1);
  for (std::size_t t = 0; t < 5; ++t) {
    double l1_none = 0.0, l1_some = 0.0;
    for (std::size_t j = 0; j < kIntents; ++j) {
      l1_none += std::abs(none.frames(t, kBase + j));
      l1_some += std::abs(some.frames(t, kBase + j));
    }
    CHECK(l1_none == 0.0);
    CHECK(l1_some == 1.0);
  }
  CHECK_THROWS_AS(build_input(policy, fs, nullptr, kIntents), ArgumentError);
}

TEST_CASE("hybrid boundaries reduce to the pure policies") {
  CHECK(hybrid_switch_frame(0.0, 10) == 0);
  CHECK(hybrid_switch_frame(1.0, 10) == 10);
  CHECK(hybrid_switch_frame(0.5, 9) == 5);
  CHECK(hybrid_switch_frame(0.7, 10) == 7);
  CHECK(hybrid_switch_frame(0.7, 1) == 1);
  const A2IModel a2i = small_a2i();
  Rng rng(4);
  const FrameSequence fs = random_frames(11, rng);
  const auto h0 = build_input(ConditioningPolicy::make(ConditioningKind::kHybridSwitch, kEmb, kIntents, 0.0), fs, &a2i, {});
  const auto rf = build_input(ConditioningPolicy::make(ConditioningKind::kRepeatedFinalEmbedding, kEmb, kIntents), fs, &a2i, {});
  const auto h1 = build_input(ConditioningPolicy::make(ConditioningKind::kHybridSwitch, kEmb, kIntents, 1.0), fs, &a2i, {});
  const auto pf = build_input(ConditioningPolicy::make(ConditioningKind::kPerFrameEmbedding, kEmb, kIntents), fs, &a2i, {});
  CHECK(h0.frames == rf.frames);
  CHECK(h1.frames == pf.frames);
}

TEST_CASE("per-frame policies are causal and repeated final is not") {
  const A2IModel a2i = small_a2i();
  Rng rng(5);
  const FrameSequence fs = random_frames(10, rng);
  for (const auto& policy : all_policies()) {
    const ConditionedUtterance full = build_input(policy, fs, &a2i, 1);
    bool prefix_equal = true;
    for (std::size_t k = 1; k < 10; ++k) {
      FrameSequence prefix = fs;
      prefix.frames = fs.frames.slice_rows(0, k);
      prefix_equal = prefix_equal && build_input(policy, prefix, &a2i, 1).frames == full.frames.slice_rows(0, k);
    }
    CHECK_MESSAGE(prefix_equal == policy.streamable(), describe(policy));
  }
}

TEST_CASE("A2I-dependent kinds need a model") {
  Rng rng(6);
  const FrameSequence fs = random_frames(3, rng);
  for (const auto& policy : all_policies()) {
    if (policy.needs_a2i())
      CHECK_THROWS_AS(build_input(policy, fs, nullptr, 0), ConfigError);
    else
      CHECK_NOTHROW(build_input(policy, fs, nullptr, 0));
  }
  const A2IModel a2i = small_a2i();
  FrameSequence wrong;
  wrong.frames = testing::random_tensor(3, kBase + 1, rng);
  CHECK_THROWS_AS(build_input(all_policies()[1], wrong, &a2i, 0), DimensionError);
}

TEST_CASE("augmentation leaves the appended columns alone") {
  const A2IModel a2i = small_a2i();
  Rng rng(7);
  FrameSequence fs = random_frames(40, rng);
  const auto policy = ConditioningPolicy::make(ConditioningKind::kPerFramePosterior, kEmb, kIntents);
  const ConditionedUtterance clean = build_input(policy, fs, &a2i, {});
  AugmentPolicy aug;
  aug.max_freq_width = 3;
  aug.max_time_ratio = 0.5;
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ConditionedUtterance noisy = clean;
    Rng r(seed);
    augment_base_columns(noisy, aug, r);
    for (std::size_t t = 0; t < 40; ++t) {
      for (std::size_t j = kBase; j < clean.frames.cols(); ++j) CHECK(noisy.frames(t, j) == clean.frames(t, j));
      for (std::size_t d = 0; d < kBase; ++d) changed = changed || noisy.frames(t, d) != clean.frames(t, d);
    }
  }
  CHECK(changed);
}

TEST_CASE("the frozen A2I checksum survives transducer training") {
  CorpusSpec spec = default_corpus_spec();
  spec.feature_dim = kBase;
  spec.a2i_per_intent = 1;
  spec.train_per_intent = 3;
  spec.dev_per_intent = 1;
  spec.test_per_intent = 1;
  const Corpus corpus = generate(spec);
  A2IConfig ac;
  ac.input_dim = kBase;
  ac.num_intents = spec.num_intents();
  ac.lstm_units = 5;
  ac.embedding_dim = kEmb;
  const A2IModel a2i(ac);
  FrozenInferenceGuard guard(a2i);
  CHECK(guard.checksum() == frozen_inference_guard(a2i));

  const Vocabulary vocab = build_vocabulary(corpus.train, 40);
  const auto policy = ConditioningPolicy::make(ConditioningKind::kPerFramePosterior, kEmb, spec.num_intents());
  const auto examples = prepare_examples(corpus.train, vocab, policy, &a2i);
  RnntConfig rc;
  rc.input_dim = kBase + policy.conditioning_dim;
  rc.vocab_size = vocab.size();
  rc.encoder_layers = 1;
  rc.encoder_units = 8;
  rc.pred_units = 8;
  TrainSettings settings;
  settings.steps = 100;
  settings.batch_size = 2;
  AugmentPolicy aug;
  aug.max_freq_width = 2;
  (void)train_rnnt(rc, settings, aug, examples);
  CHECK_NOTHROW(guard.verify());

  const A2IModel reloaded = A2IModel::from_checkpoint(deserialize_checkpoint(serialize_checkpoint(a2i.to_checkpoint())));
  CHECK(frozen_inference_guard(reloaded) == guard.checksum());

  A2IModel tampered = a2i;
  FrozenInferenceGuard tampered_guard(tampered);
  tampered.params()[0].tensor->data()[0] += 1e-12;
  CHECK_THROWS_AS(tampered_guard.verify(), IntegrityError);
}

TEST_CASE("streaming decode matches offline greedy for streamable policies") {
  const A2IModel a2i = small_a2i();
  Rng rng(8);
  for (const auto& policy : all_policies()) {
    RnntConfig rc;
    rc.input_dim = kBase + policy.conditioning_dim;
    rc.vocab_size = 7;
    rc.encoder_layers = 1;
    rc.encoder_units = 6;
    rc.pred_units = 6;
    rc.seed = 23;
    const RnntModel model(rc);
    const FrameSequence fs = random_frames(15, rng);
    if (!policy.streamable()) {
      CHECK_THROWS_AS(StreamingDecoder(model, policy, &a2i, 1), ConfigError);
      continue;
    }
    const Hypothesis offline = greedy_decode(model, build_input(policy, fs, &a2i, 1).frames);
    const Hypothesis online = streaming_decode(model, fs, policy, &a2i, 1);
    CHECK(online.tokens == offline.tokens);
    CHECK(online.frames == offline.frames);
    CHECK(online.log_prob == doctest::Approx(offline.log_prob).epsilon(1e-12));

    StreamingDecoder dec(model, policy, &a2i, 1);
    for (std::size_t t = 0; t < 15; ++t) {
      dec.accept_frame(fs.frames.row(t));
      const Hypothesis& partial = dec.partial();
      CHECK(partial.tokens.size() <= offline.tokens.size());
      CHECK(std::equal(partial.tokens.begin(), partial.tokens.end(), offline.tokens.begin()));
    }
    CHECK(dec.frames_consumed() == 15);
  }
}
