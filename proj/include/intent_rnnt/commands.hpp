#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intent_rnnt/config.hpp"
#include "intent_rnnt/eval.hpp"
#include "intent_rnnt/pipeline.hpp"

namespace intent_rnnt {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Run directory layout under config.out_dir:
//   corpus/                 a2i, train, dev, test .jsonl + manifest.json
//   a2i/                    <objective>.ckpt, accuracy.tsv, posteriors/
//   rnnt/<policy>/          model.ckpt, vocab.txt, losses.tsv, hyps-*, eval-*
//   sweep_hybrid.tsv
std::filesystem::path corpus_dir(const RunConfig& config);
std::filesystem::path a2i_dir(const RunConfig& config);
std::filesystem::path a2i_checkpoint_path(const RunConfig& config, A2IObjective objective);
std::filesystem::path rnnt_dir(const RunConfig& config, const ConditioningPolicy& policy);

// File-system friendly policy name, e.g. "hybrid_switch_0.7".
std::string policy_tag(const ConditioningPolicy& policy);
ConditioningPolicy policy_from_config(const RunConfig& config);

// manifest.json: tool name and version, the command, and the resolved config.
void write_manifest(const std::filesystem::path& dir, const RunConfig& config, std::string_view command);

std::span<const Utterance> select_split(const Corpus& corpus, std::string_view split);

void generate_corpus_command(const RunConfig& config, std::ostream& out);

// Trains both objectives on the a2i split and reports dev accuracy per
// objective, per utterance and per frame.
void train_a2i_command(const RunConfig& config, std::ostream& out);

// Trains the transducer for the configured policy with the A2I frozen and
// guarded. Returns the checkpoint path.
std::filesystem::path train_rnnt_command(const RunConfig& config, std::ostream& out);

struct DecodeRequest {
  DecodeMode mode = DecodeMode::kOffline;
  std::string split = "test";
  std::optional<std::filesystem::path> checkpoint;  // defaults to the policy directory
  std::optional<std::filesystem::path> output;
};

// Streaming requests for non-streamable policies fail with a ConfigError
// before any file is opened. The checkpoint's policy echo must match the
// configured policy.
std::filesystem::path decode_command(const RunConfig& config, const DecodeRequest& request, std::ostream& out);

struct EvaluateRequest {
  std::string split = "test";
  std::optional<std::filesystem::path> hypotheses;  // defaults to the offline hypotheses
  std::optional<std::filesystem::path> baseline;    // an earlier report.json
  std::optional<std::filesystem::path> output_prefix;
};

EvalReport evaluate_command(const RunConfig& config, const EvaluateRequest& request, std::ostream& out);

void analyze_posteriors_command(const RunConfig& config, A2IObjective objective, std::string_view split,
                                std::ostream& out);

struct SweepRow {
  double fraction = 0.0;
  std::string system;
  bool streamable = false;
  double wer = 0.0;
  double werr = 0.0;
};

// Trains and evaluates the baseline and one hybrid model per fraction.
std::vector<SweepRow> sweep_hybrid_command(const RunConfig& config, std::ostream& out);

}  // namespace intent_rnnt
