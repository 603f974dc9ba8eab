#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "intent_rnnt/a2i.hpp"
#include "intent_rnnt/conditioning.hpp"
#include "intent_rnnt/corpus.hpp"
#include "intent_rnnt/features.hpp"
#include "intent_rnnt/optimizer.hpp"
#include "intent_rnnt/rnnt.hpp"

namespace intent_rnnt {

struct TrainSettings {
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  double clip_norm = 1.0;
  AdamConfig adam;
};

struct A2ISection {
  std::size_t lstm_layers = 2;
  std::size_t lstm_units = 32;
  std::size_t embedding_dim = 8;
  TrainSettings train{.steps = 3000, .adam = {.schedule = {.peak_lr = 1e-2, .constant_steps = 3000}}};
};

struct RnntSection {
  std::size_t vocab_size = 128;  // BPE target, blank included
  std::size_t encoder_layers = 2;
  std::size_t encoder_units = 64;
  std::size_t pred_embedding_dim = 16;
  std::size_t pred_layers = 1;
  std::size_t pred_units = 64;
  std::size_t max_symbols_per_frame = 10;
  TrainSettings train{.steps = 3000, .adam = {.schedule = {.peak_lr = 1e-2, .constant_steps = 1500}}};
  AugmentPolicy augment;
};

struct ConditioningSection {
  ConditioningKind kind = ConditioningKind::kBaselineNone;
  double switch_fraction = 1.0;
  // Which trained A2I model feeds the policy; empty picks the usual source
  // (every-frame for posteriors, last-frame otherwise).
  std::optional<A2IObjective> a2i_source;
};

A2IObjective a2i_source_for(const ConditioningSection& section);

// One file describes a whole run. Missing keys keep the defaults above;
// unknown keys are configuration errors.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "run";
  CorpusSpec corpus = default_corpus_spec();
  A2ISection a2i;
  RnntSection rnnt;
  ConditioningSection conditioning;
  std::size_t beam_width = 1;  // 1 selects greedy search
  std::vector<double> sweep_fractions = {0.0, 0.5, 0.7, 1.0};
};

void to_json(nlohmann::json& j, const IntentSpec& v);
void from_json(const nlohmann::json& j, IntentSpec& v);
void to_json(nlohmann::json& j, const CorpusSpec& v);
void from_json(const nlohmann::json& j, CorpusSpec& v);
void to_json(nlohmann::json& j, const AugmentPolicy& v);
void from_json(const nlohmann::json& j, AugmentPolicy& v);
void to_json(nlohmann::json& j, const TrainSettings& v);
void from_json(const nlohmann::json& j, TrainSettings& v);
void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

// Model seeds are derived from the run seed and a role name.
std::uint64_t derived_seed(const RunConfig& config, std::string_view role);

A2IConfig make_a2i_config(const RunConfig& config, std::size_t input_dim, A2IObjective objective);
RnntConfig make_rnnt_config(const RunConfig& config, std::size_t input_dim, std::size_t vocab_size);

}  // namespace intent_rnnt
