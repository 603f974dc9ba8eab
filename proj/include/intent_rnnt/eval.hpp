#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intent_rnnt/corpus.hpp"

namespace intent_rnnt {

inline constexpr std::string_view kUnannotatedGroup = "None";

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;

  std::size_t total() const { return substitutions + insertions + deletions; }
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

// Unit-cost Levenshtein alignment. Among optimal alignments the backtrace
// prefers a substitution (or match), then a deletion, then an insertion.
EditCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp);

// Lowercase, drop the word-boundary marker, split on whitespace.
std::vector<std::string> scoring_words(std::string_view text);

struct RefRecord {
  std::string id;
  std::string text;
  std::string group;  // intent name, or "None" when unannotated
};

struct HypRecord {
  std::string id;
  std::string text;
  double log_prob = 0.0;
  std::vector<std::size_t> frames;
};

std::vector<RefRecord> references(std::span<const Utterance> utts, std::span<const std::string> intent_names);

struct WerCounts {
  EditCounts edits;
  std::size_t ref_words = 0;
  std::size_t utterances = 0;

  double wer() const;
};

// Pooled over utterances. A reference id without a hypothesis is an
// EvaluationError; an empty reference set is an ArgumentError from wer().
WerCounts score(std::span<const RefRecord> refs, std::span<const HypRecord> hyps);
double wer(std::span<const RefRecord> refs, std::span<const HypRecord> hyps);

// 100 (baseline - new) / baseline.
double relative_werr(double baseline_wer, double new_wer);

struct IntentRow {
  std::string group;
  std::size_t utterances = 0;
  std::size_t ref_words = 0;
  std::size_t errors = 0;
  double wer = 0.0;
  std::optional<double> werr;
};

// Rows ordered by utterance count (descending), then by group name.
std::vector<IntentRow> per_intent_breakdown(std::span<const RefRecord> refs, std::span<const HypRecord> hyps);

struct EvalReport {
  std::string system;
  bool streamable = true;
  WerCounts overall;
  std::vector<IntentRow> rows;
  std::string baseline_system;
  std::optional<double> werr;

  std::string to_tsv() const;
  std::string to_table() const;
  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
};

EvalReport evaluate(std::span<const RefRecord> refs, std::span<const HypRecord> hyps, std::string system,
                    bool streamable, const EvalReport* baseline = nullptr);

// Hypothesis files: one tab-separated record per line with id, text,
// log-probability and comma-separated emission frames.
void write_hypotheses(const std::filesystem::path& path, std::span<const HypRecord> hyps);
std::vector<HypRecord> read_hypotheses(const std::filesystem::path& path);

}  // namespace intent_rnnt
