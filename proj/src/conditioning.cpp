#include "intent_rnnt/conditioning.hpp"

#include <cmath>
#include <sstream>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

std::string to_string(ConditioningKind kind) {
  switch (kind) {
    case ConditioningKind::kBaselineNone: return "baseline_none";
    case ConditioningKind::kPerFrameEmbedding: return "per_frame_embedding";
    case ConditioningKind::kRepeatedFinalEmbedding: return "repeated_final_embedding";
    case ConditioningKind::kPerFramePosterior: return "per_frame_posterior";
    case ConditioningKind::kOneHotOracle: return "one_hot_oracle";
    case ConditioningKind::kHybridSwitch: return "hybrid_switch";
  }
  return "unknown";
}

ConditioningKind parse_conditioning_kind(std::string_view text) {
  for (auto k : {ConditioningKind::kBaselineNone, ConditioningKind::kPerFrameEmbedding,
                 ConditioningKind::kRepeatedFinalEmbedding, ConditioningKind::kPerFramePosterior,
                 ConditioningKind::kOneHotOracle, ConditioningKind::kHybridSwitch}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown conditioning kind '" + std::string(text) + "'");
}

ConditioningPolicy ConditioningPolicy::make(ConditioningKind kind, std::size_t embedding_dim, std::size_t num_intents,
                                            double switch_fraction) {
  if (kind == ConditioningKind::kHybridSwitch && !(switch_fraction >= 0.0 && switch_fraction <= 1.0))
    throw ConfigError("hybrid switch fraction must lie in [0, 1]");
  ConditioningPolicy p;
  p.kind = kind;
  p.switch_fraction = kind == ConditioningKind::kHybridSwitch ? switch_fraction : 1.0;
  switch (kind) {
    case ConditioningKind::kBaselineNone: p.conditioning_dim = 0; break;
    case ConditioningKind::kPerFrameEmbedding:
    case ConditioningKind::kRepeatedFinalEmbedding:
    case ConditioningKind::kHybridSwitch: p.conditioning_dim = embedding_dim; break;
    case ConditioningKind::kPerFramePosterior:
    case ConditioningKind::kOneHotOracle: p.conditioning_dim = num_intents; break;
  }
  return p;
}

bool ConditioningPolicy::streamable() const {
  if (kind == ConditioningKind::kRepeatedFinalEmbedding) return false;
  if (kind == ConditioningKind::kHybridSwitch && switch_fraction < 1.0) return false;
  return true;
}

bool ConditioningPolicy::needs_a2i() const {
  return kind != ConditioningKind::kBaselineNone && kind != ConditioningKind::kOneHotOracle;
}

std::string describe(const ConditioningPolicy& policy) {
  std::ostringstream out;
  out << to_string(policy.kind);
  if (policy.kind == ConditioningKind::kHybridSwitch) out << "@" << policy.switch_fraction;
  return out.str();
}

std::size_t hybrid_switch_frame(double switch_fraction, std::size_t num_frames) {
  const double boundary = std::ceil(switch_fraction * static_cast<double>(num_frames));
  return std::min(num_frames, static_cast<std::size_t>(std::max(0.0, boundary)));
}

namespace {

void check_a2i(const ConditioningPolicy& policy, const A2IModel* a2i) {
  if (!policy.needs_a2i()) return;
  if (a2i == nullptr) throw ConfigError("conditioning policy " + describe(policy) + " requires an A2I model");
  const std::size_t expected = policy.kind == ConditioningKind::kPerFramePosterior ? a2i->config().num_intents
                                                                                   : a2i->config().embedding_dim;
  if (policy.conditioning_dim != expected)
    throw ConfigError("conditioning width does not match the A2I model for " + describe(policy));
}

void check_one_hot(const ConditioningPolicy& policy, std::optional<std::size_t> annotation) {
  if (policy.kind == ConditioningKind::kOneHotOracle && annotation && *annotation >= policy.conditioning_dim)
    throw ArgumentError("intent annotation out of range for one-hot conditioning");
}

}  // namespace

ConditionedUtterance build_input(const ConditioningPolicy& policy, const FrameSequence& fs, const A2IModel* a2i,
                                 std::optional<std::size_t> annotation) {
  check_a2i(policy, a2i);
  check_one_hot(policy, annotation);
  const std::size_t T = fs.num_frames();
  const std::size_t D = fs.dim();
  ConditionedUtterance out;
  out.policy = policy;
  out.base_dim = D;
  out.frames = Tensor(T, D + policy.conditioning_dim);
  for (std::size_t t = 0; t < T; ++t) std::copy(fs.frames.row(t).begin(), fs.frames.row(t).end(), out.frames.row(t).begin());
  if (policy.conditioning_dim == 0) return out;

  auto append = [&](std::size_t t, std::span<const double> block) {
    std::copy(block.begin(), block.end(), out.frames.row(t).begin() + static_cast<std::ptrdiff_t>(D));
  };

  if (policy.kind == ConditioningKind::kOneHotOracle) {
    if (annotation)
      for (std::size_t t = 0; t < T; ++t) out.frames(t, D + *annotation) = 1.0;
    return out;
  }

  out.a2i_output = a2i->forward(fs);
  const A2IOutput& a = *out.a2i_output;
  switch (policy.kind) {
    case ConditioningKind::kPerFrameEmbedding:
      for (std::size_t t = 0; t < T; ++t) append(t, a.embeddings.row(t));
      break;
    case ConditioningKind::kRepeatedFinalEmbedding:
      for (std::size_t t = 0; t < T; ++t) append(t, a.final_embedding);
      break;
    case ConditioningKind::kPerFramePosterior:
      for (std::size_t t = 0; t < T; ++t) append(t, a.posteriors.row(t));
      break;
    case ConditioningKind::kHybridSwitch: {
      const std::size_t boundary = hybrid_switch_frame(policy.switch_fraction, T);
      for (std::size_t t = 0; t < T; ++t) append(t, t < boundary ? a.embeddings.row(t) : std::span<const double>(a.final_embedding));
      break;
    }
    default: break;
  }
  return out;
}

void augment_base_columns(ConditionedUtterance& utt, const AugmentPolicy& policy, Rng& rng) {
  if (!policy.enabled) return;
  FrameSequence base;
  base.frames = Tensor(utt.frames.rows(), utt.base_dim);
  for (std::size_t t = 0; t < utt.frames.rows(); ++t)
    std::copy_n(utt.frames.row(t).begin(), utt.base_dim, base.frames.row(t).begin());
  const FrameSequence augmented = spec_augment(base, policy, rng);
  for (std::size_t t = 0; t < utt.frames.rows(); ++t)
    std::copy(augmented.frames.row(t).begin(), augmented.frames.row(t).end(), utt.frames.row(t).begin());
}

FrozenInferenceGuard::FrozenInferenceGuard(const A2IModel& model) : model_(&model), checksum_(model.checksum()) {}

void FrozenInferenceGuard::verify() const {
  const std::uint64_t now = model_->checksum();
  if (now != checksum_) {
    std::ostringstream msg;
    msg << "frozen A2I parameters changed: checksum " << std::hex << checksum_ << " -> " << now;
    throw IntegrityError(msg.str());
  }
}

std::uint64_t frozen_inference_guard(const A2IModel& model) { return model.checksum(); }

StreamingConditioner::StreamingConditioner(const ConditioningPolicy& policy, const A2IModel* a2i,
                                           std::optional<std::size_t> annotation)
    : policy_(policy), annotation_(annotation) {
  if (!policy.streamable())
    throw ConfigError("conditioning policy " + describe(policy) + " is not streamable");
  check_a2i(policy, a2i);
  check_one_hot(policy, annotation);
  if (policy.needs_a2i()) stream_.emplace(*a2i);
}

std::vector<double> StreamingConditioner::next(std::span<const double> base_frame) {
  std::vector<double> frame(base_frame.begin(), base_frame.end());
  frame.resize(base_frame.size() + policy_.conditioning_dim, 0.0);
  const auto block = frame.begin() + static_cast<std::ptrdiff_t>(base_frame.size());
  switch (policy_.kind) {
    case ConditioningKind::kBaselineNone: break;
    case ConditioningKind::kOneHotOracle:
      if (annotation_) block[static_cast<std::ptrdiff_t>(*annotation_)] = 1.0;
      break;
    case ConditioningKind::kPerFramePosterior:
      stream_->step(base_frame, embedding_, posterior_);
      std::copy(posterior_.begin(), posterior_.end(), block);
      break;
    default:  // per-frame embedding, or hybrid with switch fraction 1
      stream_->step(base_frame, embedding_, posterior_);
      std::copy(embedding_.begin(), embedding_.end(), block);
      break;
  }
  return frame;
}

StreamingDecoder::StreamingDecoder(const RnntModel& model, const ConditioningPolicy& policy, const A2IModel* a2i,
                                   std::optional<std::size_t> annotation)
    : conditioner_(policy, a2i, annotation), encoder_(model), search_(model) {}

void StreamingDecoder::accept_frame(std::span<const double> base_frame) {
  const std::vector<double> frame = conditioner_.next(base_frame);
  const std::vector<double> logits = encoder_.step(frame);
  search_.consume(logits, frame_++);
}

Hypothesis streaming_decode(const RnntModel& model, const FrameSequence& fs, const ConditioningPolicy& policy,
                            const A2IModel* a2i, std::optional<std::size_t> annotation) {
  StreamingDecoder decoder(model, policy, a2i, annotation);
  for (std::size_t t = 0; t < fs.num_frames(); ++t) decoder.accept_frame(fs.frames.row(t));
  return decoder.finish();
}

}  // namespace intent_rnnt
