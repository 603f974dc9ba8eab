#include "intent_rnnt/subword.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string normalize_text(std::string_view text) {
  std::string stripped;
  for (std::size_t i = 0; i < text.size();) {
    if (text.substr(i, kWordBoundary.size()) == kWordBoundary) {
      stripped.push_back(' ');
      i += kWordBoundary.size();
    } else {
      stripped.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
  }
  std::string out;
  for (const auto& w : split_words(stripped)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

namespace {

std::vector<std::string> word_symbols(std::string_view word) {
  std::vector<std::string> symbols{std::string(kWordBoundary)};
  for (auto& c : utf8_chars(word)) symbols.push_back(std::move(c));
  return symbols;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      out.push_back(left + right);
      ++i;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::pair<std::string, std::string>> merges)
    : tokens_(std::move(tokens)), merges_(std::move(merges)) {
  if (tokens_.empty() || tokens_[0] != kBlankToken) throw ParseError("vocabulary must start with the blank token");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw ParseError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
  for (const auto& [l, r] : merges_) {
    if (!contains(l) || !contains(r) || !contains(l + r))
      throw ParseError("merge rule '" + l + " " + r + "' references unknown tokens");
  }
}

std::size_t Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw ArgumentError("token '" + std::string(token) + "' not in vocabulary");
  return it->second;
}

std::vector<std::size_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& word : split_words(text)) {
    auto symbols = word_symbols(word);
    for (const auto& s : symbols) {
      if (!contains(s)) throw ArgumentError("cannot encode unseen character '" + s + "'");
    }
    for (const auto& [l, r] : merges_) {
      if (symbols.size() < 2) break;
      apply_merge(symbols, l, r);
    }
    for (const auto& s : symbols) ids.push_back(index_.at(s));
  }
  return ids;
}

std::string Vocabulary::decode(std::span<const std::size_t> ids) const {
  std::string joined;
  for (std::size_t id : ids) {
    if (id == kBlankId || id >= tokens_.size()) throw ArgumentError("cannot decode token id " + std::to_string(id));
    joined += tokens_[id];
  }
  std::string spaced;
  for (std::size_t i = 0; i < joined.size();) {
    if (joined.compare(i, kWordBoundary.size(), kWordBoundary) == 0) {
      spaced.push_back(' ');
      i += kWordBoundary.size();
    } else {
      spaced.push_back(joined[i++]);
    }
  }
  std::string out;
  for (const auto& w : split_words(spaced)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string Vocabulary::to_text() const {
  std::ostringstream out;
  out << "#intent-rnnt-vocab 1\n";
  for (const auto& t : tokens_) out << t << '\n';
  out << "#merges\n";
  for (const auto& [l, r] : merges_) out << l << ' ' << r << '\n';
  return out.str();
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "#intent-rnnt-vocab 1") throw ParseError("missing vocabulary header");
  std::vector<std::string> tokens;
  std::vector<std::pair<std::string, std::string>> merges;
  bool in_merges = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!in_merges && line == "#merges") {
      in_merges = true;
      continue;
    }
    if (!in_merges) {
      tokens.push_back(line);
      continue;
    }
    const auto space = line.find(' ');
    if (space == std::string::npos || line.find(' ', space + 1) != std::string::npos)
      throw ParseError("malformed merge rule on line " + std::to_string(line_no));
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  if (!in_merges) throw ParseError("vocabulary file has no #merges section");
  return Vocabulary(std::move(tokens), std::move(merges));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

Vocabulary bpe_train(std::span<const std::string> corpus, std::size_t target_size) {
  if (corpus.empty()) throw ArgumentError("cannot train a vocabulary on an empty corpus");

  std::map<std::string, std::size_t> word_counts;
  for (const auto& line : corpus)
    for (const auto& w : split_words(line)) ++word_counts[w];

  std::set<std::string> base;
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [w, n] : word_counts) {
    auto symbols = word_symbols(w);
    base.insert(symbols.begin(), symbols.end());
    words.emplace_back(std::move(symbols), n);
  }
  if (target_size < base.size() + 1) {
    std::ostringstream msg;
    msg << "target vocabulary size " << target_size << " is below the " << base.size() + 1
        << " base symbols (including blank)";
    throw ArgumentError(msg.str());
  }

  std::vector<std::string> tokens{std::string(kBlankToken)};
  tokens.insert(tokens.end(), base.begin(), base.end());
  std::set<std::string> known(tokens.begin(), tokens.end());
  std::vector<std::pair<std::string, std::string>> merges;

  while (tokens.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
    for (const auto& [symbols, n] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pair_counts[{symbols[i], symbols[i + 1]}] += n;
    // std::map iterates pairs in lexicographic order, so the first maximum
    // wins ties.
    const std::pair<std::string, std::string>* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, n] : pair_counts) {
      if (n > best_count) {
        best = &pair;
        best_count = n;
      }
    }
    if (best == nullptr || best_count < 2) break;
    const auto [left, right] = *best;
    for (auto& [symbols, n] : words) apply_merge(symbols, left, right);
    merges.emplace_back(left, right);
    if (known.insert(left + right).second) tokens.push_back(left + right);
  }
  return Vocabulary(std::move(tokens), std::move(merges));
}

}  // namespace intent_rnnt
