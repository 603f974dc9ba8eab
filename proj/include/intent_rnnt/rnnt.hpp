#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "intent_rnnt/checkpoint.hpp"
#include "intent_rnnt/layers.hpp"
#include "intent_rnnt/tensor.hpp"

namespace intent_rnnt {

struct RnntConfig {
  std::size_t input_dim = 0;  // base feature dim + conditioning dim
  std::size_t vocab_size = 0;  // including blank at id 0
  std::size_t encoder_layers = 2;
  std::size_t encoder_units = 64;
  std::size_t pred_embedding_dim = 16;
  std::size_t pred_layers = 1;
  std::size_t pred_units = 64;
  std::size_t max_symbols_per_frame = 10;
  std::uint64_t seed = 1;
};

// log_softmax(enc_t + pred_u) for every lattice node (t, u), laid out
// [t][u][k].
class JointLattice {
 public:
  JointLattice() = default;
  JointLattice(std::size_t frames, std::size_t label_positions, std::size_t vocab);

  // enc: T x V logits, pred: (U+1) x V logits.
  static JointLattice from_logits(const Tensor& enc, const Tensor& pred);

  std::size_t frames() const { return frames_; }
  std::size_t label_positions() const { return label_positions_; }
  std::size_t vocab() const { return vocab_; }

  double& at(std::size_t t, std::size_t u, std::size_t k) { return values_[index(t, u, k)]; }
  double at(std::size_t t, std::size_t u, std::size_t k) const { return values_[index(t, u, k)]; }
  std::span<double> node(std::size_t t, std::size_t u) { return {values_.data() + index(t, u, 0), vocab_}; }
  std::span<const double> node(std::size_t t, std::size_t u) const { return {values_.data() + index(t, u, 0), vocab_}; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t index(std::size_t t, std::size_t u, std::size_t k) const { return (t * label_positions_ + u) * vocab_ + k; }

  std::size_t frames_ = 0;
  std::size_t label_positions_ = 0;
  std::size_t vocab_ = 0;
  std::vector<double> values_;
};

struct RnntLossResult {
  double loss = 0.0;        // -log P(target | input)
  JointLattice grad;        // d loss / d lattice log-probabilities
};

// Log-space forward-backward over blank (advance t) and label (advance u)
// transitions. The lattice must have exactly target.size() + 1 label
// positions.
RnntLossResult rnnt_loss(const JointLattice& lattice, std::span<const std::size_t> target, bool with_grad = true);

// Pushes lattice log-probability gradients through the log-softmax and the
// additive joint: returns dL/d(enc logits) and dL/d(pred logits).
void joint_backward(const JointLattice& lattice, const JointLattice& grad, Tensor& d_enc, Tensor& d_pred);

struct Hypothesis {
  std::vector<std::size_t> tokens;  // no blanks
  double log_prob = 0.0;
  std::vector<std::size_t> frames;  // emission frame per token
};

class RnntModel {
 public:
  explicit RnntModel(RnntConfig config);

  const RnntConfig& config() const { return config_; }

  // Stacked unidirectional LSTMs and a linear head: T x V logits.
  Tensor encoder_forward(const Tensor& frames) const;
  // Row 0 is the start state; row u conditions on tokens[0..u).
  Tensor prediction_forward(std::span<const std::size_t> tokens) const;

  class EncoderStream {
   public:
    explicit EncoderStream(const RnntModel& model);
    // Returns the logits for this frame; bit-identical to the matching
    // encoder_forward row.
    std::vector<double> step(std::span<const double> frame);

   private:
    const RnntModel* model_;
    std::vector<LstmLayer::State> states_;
  };

  struct PredictionState {
    std::vector<LstmLayer::State> states;
    std::vector<double> logits;
  };
  PredictionState prediction_start() const;
  PredictionState prediction_advance(const PredictionState& state, std::size_t token) const;

  // Transducer loss for one utterance; accumulates parameter gradients and
  // optionally returns dL/d(frames).
  double train_loss(const Tensor& frames, std::span<const std::size_t> target, Tensor* d_input = nullptr);

  ParamList params();
  ConstParamList params() const;

  // metadata_json is embedded verbatim in the checkpoint config echo.
  Checkpoint to_checkpoint(const std::string& metadata_json = "{}") const;
  static RnntModel from_checkpoint(const Checkpoint& checkpoint, std::string* metadata_json = nullptr);

 private:
  void check_tokens(std::span<const std::size_t> tokens) const;

  RnntConfig config_;
  std::vector<LstmLayer> encoder_;
  Linear encoder_head_;
  Embedding pred_embedding_;
  std::vector<LstmLayer> pred_lstms_;
  Linear pred_head_;
};

// Trainable parameters of the transducer (a frozen A2I front-end is a
// separate model and never counted here).
std::size_t count_params(const RnntModel& model);

// Smallest encoder width at which the model holds at least target_params
// parameters. Sizes a baseline against a conditioned system plus its A2I.
RnntConfig widen_encoder_to(RnntConfig config, std::size_t target_params);

// Emits the argmax symbol until blank wins (at most max_symbols_per_frame
// labels per frame), then advances.
class GreedySearch {
 public:
  explicit GreedySearch(const RnntModel& model);
  void consume(std::span<const double> encoder_logits, std::size_t frame);
  const Hypothesis& hypothesis() const { return hyp_; }

 private:
  const RnntModel* model_;
  RnntModel::PredictionState pred_;
  Hypothesis hyp_;
  std::vector<double> joint_;
};

Hypothesis greedy_decode(const RnntModel& model, const Tensor& frames);

// Frame-synchronous beam search with merging of identical label sequences
// (probabilities summed in log space). beam_width == 0 disables pruning.
// Results are sorted by log-probability, best first.
std::vector<Hypothesis> beam_search(const RnntModel& model, const Tensor& frames, std::size_t beam_width);

}  // namespace intent_rnnt
