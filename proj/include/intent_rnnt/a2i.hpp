#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intent_rnnt/checkpoint.hpp"
#include "intent_rnnt/corpus.hpp"
#include "intent_rnnt/features.hpp"
#include "intent_rnnt/layers.hpp"

namespace intent_rnnt {

enum class A2IObjective { kLastFrame, kEveryFrame };

std::string to_string(A2IObjective objective);
A2IObjective parse_a2i_objective(std::string_view text);

struct A2IConfig {
  std::size_t input_dim = 0;
  std::size_t num_intents = 8;
  std::size_t lstm_layers = 2;
  std::size_t lstm_units = 32;
  std::size_t embedding_dim = 8;
  A2IObjective objective = A2IObjective::kEveryFrame;
  std::uint64_t seed = 1;
};

struct A2IOutput {
  Tensor embeddings;  // T x embedding_dim, e_t
  Tensor posteriors;  // T x num_intents, z_t
  std::vector<double> final_embedding;  // e_T, a copy of the last embeddings row
};

// LSTM encoder whose last layer projects to the embedding dimension, followed
// by a dense layer and a softmax over intents. Strictly causal in time.
class A2IModel {
 public:
  explicit A2IModel(A2IConfig config);

  const A2IConfig& config() const { return config_; }

  A2IOutput forward(const Tensor& frames) const;
  A2IOutput forward(const FrameSequence& fs) const { return forward(fs.frames); }

  // Frame-at-a-time inference; reproduces forward() rows exactly.
  class Stream {
   public:
    explicit Stream(const A2IModel& model);
    void step(std::span<const double> frame, std::vector<double>& embedding, std::vector<double>& posterior);

   private:
    const A2IModel* model_;
    std::vector<LstmLayer::State> states_;
  };

  // Cross-entropy against `label` (last frame only, or mean over all frames),
  // accumulating parameter gradients. When d_input is given it receives
  // dL/d(frames).
  double loss(const Tensor& frames, std::size_t label, A2IObjective objective, Tensor* d_input = nullptr);

  ParamList params();
  ConstParamList params() const;
  std::size_t num_params() const;
  std::uint64_t checksum() const;

  Checkpoint to_checkpoint() const;
  static A2IModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  A2IConfig config_;
  std::vector<LstmLayer> lstms_;
  Linear dense_;
};

// a2i_loss contract: the utterance must carry an annotation.
double a2i_loss(A2IModel& model, const Utterance& utt, A2IObjective objective);

enum class AccuracyMode { kPerUtterance, kPerFrame };

// Per-utterance: last-frame argmax vs label. Per-frame: pooled fraction of
// frames whose argmax matches the utterance label. Uses annotated utterances.
double accuracy(const A2IModel& model, std::span<const Utterance> dataset, AccuracyMode mode);
// Same count over precomputed T x K posterior matrices.
double accuracy(std::span<const Tensor> posteriors, std::span<const std::size_t> labels, AccuracyMode mode);

// Trailing moving average over `window` frames per column; the first frames
// average over the samples available.
Tensor smooth_trajectory(const Tensor& posteriors, std::size_t window = 4);

// (1-based index of the first frame whose value in column `intent` reaches
// 0.8 x the final-frame value) / T. Expects an already-smoothed trajectory.
double convergence_ratio(const Tensor& posteriors, std::size_t intent);

inline constexpr std::size_t kAnalysisGridPoints = 100;
inline constexpr double kConvergenceThreshold = 0.8;

// Grid point g = i/100 reads frame floor(g*T) (0-based).
std::size_t grid_frame(std::size_t grid_index, std::size_t num_frames);

struct IntentCurve {
  std::size_t intent = 0;
  std::size_t count = 0;
  std::vector<double> mean;  // kAnalysisGridPoints
  std::vector<double> stddev;
};

struct ConvergenceStats {
  std::size_t intent = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct PosteriorReport {
  std::vector<std::string> intent_names;
  std::vector<IntentCurve> curves;
  std::vector<ConvergenceStats> convergence;
  std::vector<std::string> notes;

  std::string curves_tsv() const;
  std::string convergence_tsv() const;
};

// Statistics over correctly predicted utterances, grouped by intent, using
// smoothed posteriors of the predicted intent.
PosteriorReport analyze_posteriors(const A2IModel& model, std::span<const Utterance> dataset,
                                   std::span<const std::string> intent_names);

}  // namespace intent_rnnt
