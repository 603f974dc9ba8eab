#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "intent_rnnt/corpus.hpp"
#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/subword.hpp"

using namespace intent_rnnt;

namespace {

CorpusSpec small_spec() {
  CorpusSpec spec = default_corpus_spec();
  spec.a2i_per_intent = 5;
  spec.train_per_intent = 20;
  spec.dev_per_intent = 5;
  spec.test_per_intent = 10;
  return spec;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool same_utterance(const Utterance& a, const Utterance& b) {
  return a.id == b.id && a.transcript == b.transcript && a.intent == b.intent && a.annotated == b.annotated &&
         a.features.frames == b.features.frames;
}

}  // namespace

TEST_CASE("the default spec is valid and mirrors the intent inventory") {
  const CorpusSpec spec = default_corpus_spec();
  CHECK_NOTHROW(validate(spec));
  const auto names = spec.intent_names();
  REQUIRE(names.size() == 8);
  CHECK(names.front() == "PlayMusicIntent");
  CHECK(names.back() == "Other");
  CHECK(spec.annotation_fraction == 0.64);
}

TEST_CASE("invalid specs are rejected") {
  CorpusSpec empty_template = default_corpus_spec();
  empty_template.intents[0].templates.push_back("   ");
  CHECK_THROWS_AS(validate(empty_template), SpecError);

  CorpusSpec undefined_slot = default_corpus_spec();
  undefined_slot.intents[1].templates.push_back("{nowhere} {C}");
  CHECK_THROWS_AS(validate(undefined_slot), SpecError);

  CorpusSpec bad_fraction = default_corpus_spec();
  bad_fraction.annotation_fraction = 1.5;
  CHECK_THROWS_AS(validate(bad_fraction), SpecError);

  // A pair whose words can both appear in the same intent is not a
  // cross-intent homophone.
  CorpusSpec overlapping = default_corpus_spec();
  overlapping.homophone_pairs.push_back({"song", "album"});
  CHECK_THROWS_AS(validate(overlapping), SpecError);
  CHECK_THROWS_AS(generate(overlapping), SpecError);
}

TEST_CASE("generation is reproducible and splits are disjoint") {
  const CorpusSpec spec = small_spec();
  const Corpus a = generate(spec);
  const Corpus b = generate(spec);
  REQUIRE(a.train.size() == 160);
  REQUIRE(a.test.size() == 80);
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(same_utterance(a.train[i], b.train[i]));

  std::set<std::string> ids;
  for (const auto* split : {&a.a2i, &a.train, &a.dev, &a.test})
    for (const auto& u : *split) CHECK(ids.insert(u.id).second);

  CorpusSpec other = spec;
  other.seed = 2;
  CHECK(!same_utterance(generate(other).train[0], a.train[0]));
}

TEST_CASE("every word renders as a fixed number of frames") {
  const CorpusSpec spec = small_spec();
  const Corpus c = generate(spec);
  for (const auto& u : c.train) {
    CHECK(u.features.num_frames() == spec.frames_per_word * split_words(u.transcript).size());
    CHECK(u.features.dim() == spec.feature_dim);
    CHECK(u.features.source == FeatureSource::kSynthetic);
    CHECK(u.features.frames.all_finite());
    CHECK(u.intent.has_value());
  }
}

TEST_CASE("noise-free renderings are identical and homophones share frames") {
  CorpusSpec spec = small_spec();
  spec.noise_sigma = 0.0;
  const std::vector<std::string> words = {"play", "the", "song"};
  CHECK(render_transcript(spec, words, 0, 1).frames == render_transcript(spec, words, 0, 99).frames);

  for (const auto& [first, second] : spec.homophone_pairs) {
    CHECK(word_prototype(spec, first) == word_prototype(spec, second));
    const auto a = render_transcript(spec, {first}, std::nullopt, 5);
    const auto b = render_transcript(spec, {second}, std::nullopt, 6);
    CHECK(a.frames == b.frames);
  }
  // Different words get different prototypes of unit norm.
  const auto p = word_prototype(spec, "song");
  const auto q = word_prototype(spec, "stop");
  double norm = 0.0, dot = 0.0;
  for (std::size_t d = 0; d < p.size(); ++d) norm += p[d] * p[d], dot += p[d] * q[d];
  CHECK(std::sqrt(norm) == doctest::Approx(1.0));
  CHECK(std::abs(dot) < 0.9);
}

TEST_CASE("homophone words occur under more than one intent") {
  const CorpusSpec spec = small_spec();
  const Corpus c = generate(spec);
  const auto names = c.intent_names;
  for (const auto& [first, second] : spec.homophone_pairs) {
    std::set<std::size_t> with_first, with_second;
    for (const auto& u : c.train)
      for (const auto& w : split_words(u.transcript)) {
        if (w == first) with_first.insert(*u.intent);
        if (w == second) with_second.insert(*u.intent);
      }
    for (std::size_t i : with_first) CHECK(!with_second.contains(i));
  }
}

TEST_CASE("annotation fraction is hit on ten thousand utterances") {
  CorpusSpec spec = default_corpus_spec();
  spec.a2i_per_intent = 0;
  spec.train_per_intent = 1250;
  spec.dev_per_intent = 0;
  spec.test_per_intent = 0;
  spec.feature_dim = 4;
  const Corpus c = generate(spec);
  REQUIRE(c.train.size() == 10000);
  std::size_t annotated = 0;
  for (const auto& u : c.train) annotated += u.annotated;
  CHECK(annotated >= 6300);
  CHECK(annotated <= 6500);
  for (const auto& u : c.train) CHECK(u.annotation().has_value() == u.annotated);
}

TEST_CASE("base64 matches the standard test vectors") {
  const std::vector<std::pair<std::string, std::string>> vectors = {
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
      {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, encoded] : vectors) {
    const std::vector<unsigned char> bytes(plain.begin(), plain.end());
    CHECK(base64_encode(bytes) == encoded);
    CHECK(base64_decode(encoded) == bytes);
  }
  CHECK_THROWS_AS(base64_decode("Zm9v!"), ParseError);
  CHECK_THROWS_AS(base64_decode("Zm9"), ParseError);
}

TEST_CASE("utterance records round trip bit-exactly") {
  CorpusSpec spec = small_spec();
  spec.train_per_intent = 125;
  const Corpus c = generate(spec);
  REQUIRE(c.train.size() == 1000);
  const auto dir = temp_dir("intent_rnnt_corpus_io");
  write_utterances(dir / "u.jsonl", c.train, c.intent_names);
  const auto back = read_utterances(dir / "u.jsonl", c.intent_names);
  REQUIRE(back.size() == c.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(same_utterance(back[i], c.train[i]));

  write_corpus(dir / "corpus", spec, c);
  const Corpus reread = read_corpus(dir / "corpus");
  CHECK(reread.intent_names == c.intent_names);
  REQUIRE(reread.test.size() == c.test.size());
  for (std::size_t i = 0; i < c.test.size(); ++i) CHECK(same_utterance(reread.test[i], c.test[i]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("null intents parse to absent annotations") {
  const std::vector<std::string> names = {"A", "Other"};
  const std::string line =
      R"({"id":"x","transcript":"ok","intent":null,"annotated":false,"features":{"T":1,"D":1,"data":"AACAPw=="}})";
  const Utterance u = utterance_from_line(line, names);
  CHECK(!u.intent.has_value());
  CHECK(!u.annotation().has_value());
  CHECK(u.features.frames(0, 0) == 1.0);
}

TEST_CASE("malformed records name the line and the field") {
  const std::vector<std::string> names = {"A", "Other"};
  auto message = [&](const std::string& line) {
    try {
      (void)utterance_from_line(line, names, 7);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string corrupt =
      message(R"({"id":"x","transcript":"ok","intent":"A","annotated":true,"features":{"T":1,"D":1,"data":"AA*APw=="}})");
  CHECK(corrupt.find("line 7") != std::string::npos);
  CHECK(corrupt.find("features") != std::string::npos);
  CHECK(message(R"({"id":"x","transcript":"ok","intent":"A","annotated":true,"features":{"T":2,"D":1,"data":"AACAPw=="}})")
            .find("features") != std::string::npos);
  CHECK(message(R"({"id":"x","transcript":"ok","intent":"Q","annotated":true,"features":{"T":1,"D":1,"data":"AACAPw=="}})")
            .find("intent") != std::string::npos);
  CHECK(message("{not json").find("line 7") != std::string::npos);

  const auto dir = temp_dir("intent_rnnt_corpus_bad");
  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"id":"x","transcript":"ok","intent":"A","annotated":true,"features":{"T":1,"D":1,"data":"AACAPw=="}})" << '\n'
        << "garbage\n";
  }
  try {
    (void)read_utterances(dir / "bad.jsonl", names);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
