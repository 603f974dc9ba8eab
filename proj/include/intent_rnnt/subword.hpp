#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace intent_rnnt {

// Marks the first piece of every word.
inline constexpr std::string_view kWordBoundary = "\xE2\x96\x81";  // U+2581
inline constexpr std::string_view kBlankToken = "<blank>";
inline constexpr std::size_t kBlankId = 0;

// Byte-pair-encoding vocabulary. Id 0 is the transducer blank and is never
// produced by encode().
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, std::vector<std::pair<std::string, std::string>> merges);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  std::size_t id_of(std::string_view token) const;
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }

  std::vector<std::size_t> encode(std::string_view text) const;
  std::string decode(std::span<const std::size_t> ids) const;

  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.merges_ == b.merges_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Greedy highest-frequency pair merging over whitespace-separated words;
// ties go to the lexicographically smallest (left, right) pair. Stops at
// target_size tokens (blank included) or when no pair occurs twice.
Vocabulary bpe_train(std::span<const std::string> corpus, std::size_t target_size);

// Splits UTF-8 text into code points.
std::vector<std::string> utf8_chars(std::string_view text);

// Lowercase, collapse whitespace, drop word-boundary markers.
std::string normalize_text(std::string_view text);
std::vector<std::string> split_words(std::string_view text);

}  // namespace intent_rnnt
