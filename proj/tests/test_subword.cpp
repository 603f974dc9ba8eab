#include <doctest.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/random.hpp"
#include "intent_rnnt/subword.hpp"

using namespace intent_rnnt;

namespace {

const std::string kB(kWordBoundary);

std::vector<std::string> random_sentences(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> words = {"play", "the", "song", "stop", "bass", "base", "weather", "tomorrow",
                                          "a", "yes", "eye", "aye", "remind", "me", "video", "ok"};
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 1 + rng.below(7);
    for (std::size_t k = 0; k < len; ++k) {
      if (k) s += ' ';
      s += words[rng.below(words.size())];
    }
    out.push_back(s);
  }
  return out;
}

// Pair counts over the initial symbol sequences, before any merge.
std::map<std::pair<std::string, std::string>, int> initial_pairs(const std::vector<std::string>& corpus) {
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& line : corpus)
    for (const auto& w : split_words(line)) {
      std::vector<std::string> sym{kB};
      for (auto& c : utf8_chars(w)) sym.push_back(c);
      for (std::size_t i = 0; i + 1 < sym.size(); ++i) ++counts[{sym[i], sym[i + 1]}];
    }
  return counts;
}

}  // namespace

TEST_CASE("a single dominant pair becomes the first merge") {
  const std::vector<std::string> corpus = {"aa", "aa"};
  const Vocabulary v = bpe_train(corpus, 16);
  REQUIRE(!v.merges().empty());
  CHECK(v.merges()[0] == std::pair<std::string, std::string>{"a", "a"});
  CHECK(v.contains("aa"));
  CHECK(v.token(0) == kBlankToken);
}

TEST_CASE("first merge matches a hand count with lexicographic ties") {
  const std::vector<std::string> corpus = {"abab"};
  const Vocabulary v = bpe_train(corpus, 16);
  REQUIRE(!v.merges().empty());
  // pairs: (B,a)=1 (a,b)=2 (b,a)=1
  CHECK(v.merges()[0] == std::pair<std::string, std::string>{"a", "b"});
  CHECK(v.encode("abab").size() < 4);
}

TEST_CASE("first merge is the most frequent initial pair") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto corpus = random_sentences(50, seed);
    const auto counts = initial_pairs(corpus);
    std::pair<std::string, std::string> best;
    int best_count = 0;
    for (const auto& [pair, c] : counts)
      if (c > best_count) best = pair, best_count = c;  // map order gives the lexicographic tie-break
    const Vocabulary v = bpe_train(corpus, 64);
    REQUIRE(!v.merges().empty());
    CHECK(v.merges()[0] == best);
  }
}

TEST_CASE("target size is respected and too-small targets are rejected") {
  const auto corpus = random_sentences(200, 3);
  const Vocabulary v = bpe_train(corpus, 60);
  CHECK(v.size() <= 60);
  CHECK_THROWS_AS(bpe_train(corpus, 5), ArgumentError);
  CHECK_THROWS_AS(bpe_train(std::vector<std::string>{}, 32), ArgumentError);
}

TEST_CASE("empty text encodes to nothing") {
  const Vocabulary v = bpe_train(random_sentences(20, 1), 40);
  CHECK(v.encode("").empty());
  CHECK(v.decode(std::vector<std::size_t>{}).empty());
}

TEST_CASE("decode inverts encode on training and held-out sentences") {
  const auto corpus = random_sentences(300, 7);
  const Vocabulary v = bpe_train(corpus, 128);
  for (const auto& s : corpus) CHECK(v.decode(v.encode(s)) == s);
  for (const auto& s : random_sentences(1000, 8)) {
    const auto ids = v.encode("  " + s + "   ");
    for (std::size_t id : ids) CHECK(id != kBlankId);
    CHECK(v.decode(ids) == s);
  }
}

TEST_CASE("every word starts with a boundary-marked piece") {
  const Vocabulary v = bpe_train(random_sentences(100, 2), 80);
  for (const auto& s : random_sentences(50, 9)) {
    const auto ids = v.encode(s);
    std::size_t marked = 0;
    for (std::size_t id : ids) marked += v.token(id).rfind(kB, 0) == 0;
    CHECK(marked == split_words(s).size());
  }
}

TEST_CASE("unseen characters are reported") {
  const Vocabulary v = bpe_train(std::vector<std::string>{"abc"}, 16);
  try {
    (void)v.encode("abz");
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("'z'") != std::string::npos);
  }
}

TEST_CASE("training is deterministic") {
  const auto corpus = random_sentences(150, 4);
  CHECK(bpe_train(corpus, 90) == bpe_train(corpus, 90));
}

TEST_CASE("vocabulary files reload with identical behaviour") {
  const auto corpus = random_sentences(150, 5);
  const Vocabulary v = bpe_train(corpus, 90);
  const auto path = std::filesystem::temp_directory_path() / "intent_rnnt_vocab_test.txt";
  v.save(path);
  const Vocabulary back = Vocabulary::load(path);
  std::filesystem::remove(path);
  CHECK(back == v);
  for (const auto& s : random_sentences(100, 6)) CHECK(back.encode(s) == v.encode(s));
  CHECK_THROWS_AS(Vocabulary::from_text("not a vocab\n"), ParseError);
  CHECK_THROWS_AS(Vocabulary::from_text("#intent-rnnt-vocab 1\n<blank>\na\n"), ParseError);
  CHECK_THROWS_AS(Vocabulary::from_text("#intent-rnnt-vocab 1\n<blank>\na\n#merges\na q\n"), ParseError);
}

TEST_CASE("normalization lowercases and collapses whitespace") {
  CHECK(normalize_text("  Play\tthe  SONG ") == "play the song");
  CHECK(normalize_text(kB + "play" + kB + "it") == "play it");
}
