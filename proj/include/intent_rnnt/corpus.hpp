#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "intent_rnnt/features.hpp"

namespace intent_rnnt {

inline constexpr std::string_view kCatchAllIntent = "Other";

struct Utterance {
  std::string id;
  std::string transcript;
  FrameSequence features;
  // Ground-truth intent. Kept even when `annotated` is false so evaluation
  // can group by it; oracle conditioning must go through annotation().
  std::optional<std::size_t> intent;
  bool annotated = false;

  std::optional<std::size_t> annotation() const { return annotated ? intent : std::nullopt; }
};

// Templates are space-separated words where "{slot}" draws a word from the
// intent's slot table (falling back to the shared slots).
struct IntentSpec {
  std::string name;
  std::vector<std::string> templates;
  std::map<std::string, std::vector<std::string>> slots;
};

struct CorpusSpec {
  std::vector<IntentSpec> intents;  // last entry is the catch-all "Other"
  std::map<std::string, std::vector<std::string>> shared_slots;
  // Both words of a pair render with the same prototype.
  std::vector<std::pair<std::string, std::string>> homophone_pairs;
  // Fully annotated utterances reserved for training the A2I model, disjoint
  // from the transducer's training data.
  std::size_t a2i_per_intent = 200;
  std::size_t train_per_intent = 200;
  std::size_t dev_per_intent = 50;
  std::size_t test_per_intent = 125;
  double annotation_fraction = 0.64;
  // Annotation rate of the test split; negative means annotation_fraction.
  double test_annotation_fraction = -1.0;
  double noise_sigma = 0.1;
  // Norm of an intent-specific offset added to every frame of an utterance.
  // Well below the per-frame noise, so it only shows up when pooled over
  // many frames.
  double intent_style_scale = 0.1;
  // Gain applied to rendered frames (prototype + style + noise). Unit-norm
  // prototypes give entries of about 1/sqrt(feature_dim); the gain brings
  // them to order one.
  double feature_scale = 5.0;
  std::size_t feature_dim = 24;
  std::size_t frames_per_word = 4;
  std::uint64_t seed = 1;

  std::vector<std::string> intent_names() const;
  std::size_t num_intents() const { return intents.size(); }
};

// Throws SpecError when a template is empty, a slot is undefined, the
// catch-all is not last, or a homophone pair's words share an intent.
void validate(const CorpusSpec& spec);

// Default toy inventory: seven frequent smart-speaker intents plus "Other",
// with homophone pairs placed across intents.
CorpusSpec default_corpus_spec();

struct Corpus {
  std::vector<std::string> intent_names;
  std::vector<Utterance> a2i;
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
};

Corpus generate(const CorpusSpec& spec);

// Renders a transcript into synthetic frames. Deterministic given
// (transcript, intent, utterance seed, spec).
FrameSequence render_transcript(const CorpusSpec& spec, const std::vector<std::string>& words,
                                std::optional<std::size_t> intent, std::uint64_t utterance_seed);
std::vector<double> word_prototype(const CorpusSpec& spec, const std::string& word);

// Line-delimited records: one JSON object per utterance with id, transcript,
// intent name or null, annotated flag, and features as base64 of
// little-endian float32 (row-major) with explicit T and D.
std::string utterance_to_line(const Utterance& utt, std::span<const std::string> intent_names);
Utterance utterance_from_line(const std::string& line, std::span<const std::string> intent_names,
                              std::size_t line_no = 0);
void write_utterances(const std::filesystem::path& path, std::span<const Utterance> utts,
                      std::span<const std::string> intent_names);
std::vector<Utterance> read_utterances(const std::filesystem::path& path, std::span<const std::string> intent_names);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

// Writes a2i/train/dev/test .jsonl files and manifest.json (spec + seed).
void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace intent_rnnt
