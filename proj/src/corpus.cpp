#include "intent_rnnt/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "intent_rnnt/config.hpp"
#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/random.hpp"
#include "intent_rnnt/subword.hpp"

namespace intent_rnnt {

using nlohmann::json;

std::vector<std::string> CorpusSpec::intent_names() const {
  std::vector<std::string> names;
  for (const auto& i : intents) names.push_back(i.name);
  return names;
}

namespace {

bool is_slot(const std::string& word) { return word.size() > 2 && word.front() == '{' && word.back() == '}'; }

const std::vector<std::string>& slot_words(const CorpusSpec& spec, const IntentSpec& intent, const std::string& slot) {
  if (auto it = intent.slots.find(slot); it != intent.slots.end()) return it->second;
  if (auto it = spec.shared_slots.find(slot); it != spec.shared_slots.end()) return it->second;
  throw SpecError("intent " + intent.name + " uses undefined slot {" + slot + "}");
}

// Every word an intent's templates can produce.
std::set<std::string> intent_vocabulary(const CorpusSpec& spec, const IntentSpec& intent) {
  std::set<std::string> words;
  for (const auto& tmpl : intent.templates) {
    for (const auto& w : split_words(tmpl)) {
      if (is_slot(w)) {
        const auto& options = slot_words(spec, intent, w.substr(1, w.size() - 2));
        words.insert(options.begin(), options.end());
      } else {
        words.insert(w);
      }
    }
  }
  return words;
}

}  // namespace

void validate(const CorpusSpec& spec) {
  if (spec.intents.size() < 2) throw SpecError("corpus needs at least two intents");
  if (spec.intents.back().name != kCatchAllIntent) throw SpecError("the last intent must be the catch-all \"Other\"");
  std::set<std::string> names;
  for (const auto& intent : spec.intents) {
    if (!names.insert(intent.name).second) throw SpecError("duplicate intent name " + intent.name);
    if (intent.name == kCatchAllIntent && &intent != &spec.intents.back())
      throw SpecError("more than one catch-all intent");
    if (intent.templates.empty()) throw SpecError("intent " + intent.name + " has no templates");
    for (const auto& tmpl : intent.templates) {
      const auto words = split_words(tmpl);
      if (words.empty()) throw SpecError("intent " + intent.name + " has an empty template");
      for (const auto& w : words) {
        if (is_slot(w) && slot_words(spec, intent, w.substr(1, w.size() - 2)).empty())
          throw SpecError("slot " + w + " of intent " + intent.name + " has no words");
      }
    }
  }
  if (!(spec.annotation_fraction >= 0.0 && spec.annotation_fraction <= 1.0))
    throw SpecError("annotation_fraction must lie in [0, 1]");
  if (spec.test_annotation_fraction > 1.0) throw SpecError("test_annotation_fraction must be at most 1");
  if (spec.feature_dim == 0 || spec.frames_per_word == 0) throw SpecError("feature_dim and frames_per_word must be positive");
  if (spec.noise_sigma < 0.0 || spec.intent_style_scale < 0.0) throw SpecError("noise and style scales must be non-negative");
  if (!(spec.feature_scale > 0.0)) throw SpecError("feature_scale must be positive");

  std::vector<std::set<std::string>> vocab;
  for (const auto& intent : spec.intents) vocab.push_back(intent_vocabulary(spec, intent));
  for (const auto& [a, b] : spec.homophone_pairs) {
    if (a == b) throw SpecError("homophone pair repeats the word " + a);
    for (const auto& v : vocab) {
      if (v.contains(a) && v.contains(b))
        throw SpecError("homophones " + a + "/" + b + " share an intent; their intent sets must be disjoint");
    }
  }
}

CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  spec.shared_slots["F"] = {"ok", "hey", "now", "pls", "um", "the"};
  struct Entry {
    const char* name;
    std::vector<std::string> carriers;
    std::vector<std::string> homophones;
  };
  // Homophone pair i links intent i and intent (i + 1) mod 8. "play" and
  // "tell" carry no intent on their own, so some utterances are ambiguous.
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"bass", "base"}, {"paws", "pause"}, {"tale", "tail"}, {"aye", "eye"},
      {"hour", "our"},  {"scene", "seen"}, {"hail", "hale"}, {"buy", "bye"},
  };
  const std::vector<Entry> entries = {
      {"PlayMusicIntent", {"song", "album", "tune", "band", "play"}, {}},
      {"StopIntent", {"stop", "halt", "quiet", "cease"}, {}},
      {"ContentOnlyIntent", {"story", "book", "novel", "poem", "tell"}, {}},
      {"YesIntent", {"yes", "sure", "yeah", "yep"}, {}},
      {"SetNotificationIntent", {"alarm", "timer", "remind", "wake"}, {}},
      {"PlayVideoIntent", {"video", "movie", "film", "clip", "play"}, {}},
      {"GetWeatherForecastIntent", {"rain", "sunny", "cloud", "storm"}, {}},
      {"Other", {"lights", "call", "shop", "joke", "tell"}, {}},
  };
  const std::vector<std::string> templates = {
      "{H} {F} {C}",         "{F} {H} {F} {C}",     "{H} {F} {F} {F} {C}", "{F} {F} {H} {C}",
      "{F} {F} {F} {H} {C}", "{C} {F} {H}",         "{C} {F} {F} {H} {F}", "{F} {C} {H} {F}",
      "{F} {H} {C} {F} {H}", "{H} {F} {C} {F} {F}",
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    IntentSpec intent;
    intent.name = entries[i].name;
    intent.templates = templates;
    intent.slots["C"] = entries[i].carriers;
    intent.slots["H"] = {pairs[i].first, pairs[(i + entries.size() - 1) % entries.size()].second};
    spec.intents.push_back(std::move(intent));
  }
  spec.homophone_pairs = pairs;
  return spec;
}

std::vector<double> word_prototype(const CorpusSpec& spec, const std::string& word) {
  std::string canonical = word;
  for (const auto& [a, b] : spec.homophone_pairs)
    if (word == b) canonical = a;
  Rng rng(mix_seed(spec.seed, hash_string("word:" + canonical)));
  std::vector<double> v(spec.feature_dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

namespace {

std::vector<double> intent_style(const CorpusSpec& spec, std::size_t intent) {
  std::vector<double> v(spec.feature_dim, 0.0);
  if (spec.intent_style_scale == 0.0) return v;
  Rng rng(mix_seed(spec.seed, hash_string("style:" + spec.intents.at(intent).name)));
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x *= spec.intent_style_scale / norm;
  return v;
}

std::vector<std::string> fill_template(const CorpusSpec& spec, const IntentSpec& intent, const std::string& tmpl,
                                       Rng& rng) {
  std::vector<std::string> words;
  for (const auto& w : split_words(tmpl)) {
    if (!is_slot(w)) {
      words.push_back(w);
      continue;
    }
    const auto& options = slot_words(spec, intent, w.substr(1, w.size() - 2));
    std::string pick = options[rng.below(options.size())];
    // Avoid identical neighbours so word boundaries stay recoverable.
    for (int tries = 0; tries < 8 && !words.empty() && words.back() == pick && options.size() > 1; ++tries)
      pick = options[rng.below(options.size())];
    words.push_back(std::move(pick));
  }
  return words;
}

std::vector<Utterance> generate_split(const CorpusSpec& spec, const std::string& split, std::size_t per_intent,
                                      double annotation_fraction) {
  std::vector<Utterance> utts;
  for (std::size_t j = 0; j < per_intent; ++j) {
    for (std::size_t i = 0; i < spec.intents.size(); ++i) {
      const IntentSpec& intent = spec.intents[i];
      std::ostringstream id;
      id << split << '-' << std::setw(2) << std::setfill('0') << i << '-' << std::setw(5) << j;
      const std::uint64_t seed = mix_seed(spec.seed, hash_string(id.str()));
      Rng rng(seed);
      const std::string& tmpl = intent.templates[rng.below(intent.templates.size())];
      const auto words = fill_template(spec, intent, tmpl, rng);
      Utterance u;
      u.id = id.str();
      for (const auto& w : words) u.transcript += (u.transcript.empty() ? "" : " ") + w;
      u.features = render_transcript(spec, words, i, mix_seed(seed, 1));
      u.intent = i;
      utts.push_back(std::move(u));
    }
  }
  // Exactly round(fraction * N) utterances carry annotations.
  const auto annotated = static_cast<std::size_t>(std::llround(annotation_fraction * static_cast<double>(utts.size())));
  std::vector<std::size_t> order(utts.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  Rng shuffle(mix_seed(spec.seed, hash_string("annotate:" + split)));
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[shuffle.below(k)]);
  for (std::size_t k = 0; k < annotated; ++k) utts[order[k]].annotated = true;
  return utts;
}

}  // namespace

FrameSequence render_transcript(const CorpusSpec& spec, const std::vector<std::string>& words,
                                std::optional<std::size_t> intent, std::uint64_t utterance_seed) {
  if (words.empty()) throw SpecError("cannot render an empty transcript");
  const std::size_t D = spec.feature_dim;
  const std::vector<double> style = intent ? intent_style(spec, *intent) : std::vector<double>(D, 0.0);
  FrameSequence fs;
  fs.frames = Tensor(words.size() * spec.frames_per_word, D);
  fs.frame_period_ms = 30.0;
  fs.source = FeatureSource::kSynthetic;
  Rng noise(utterance_seed);
  std::size_t t = 0;
  for (const auto& w : words) {
    const auto proto = word_prototype(spec, w);
    for (std::size_t f = 0; f < spec.frames_per_word; ++f, ++t) {
      auto row = fs.frames.row(t);
      for (std::size_t d = 0; d < D; ++d) {
        const double value = spec.feature_scale * (proto[d] + style[d] + spec.noise_sigma * noise.normal());
        // Stored as float32 so corpus files round-trip bit-exactly.
        row[d] = static_cast<double>(static_cast<float>(value));
      }
    }
  }
  return fs;
}

Corpus generate(const CorpusSpec& spec) {
  validate(spec);
  Corpus corpus;
  corpus.intent_names = spec.intent_names();
  const double test_fraction = spec.test_annotation_fraction >= 0.0 ? spec.test_annotation_fraction : spec.annotation_fraction;
  corpus.a2i = generate_split(spec, "a2i", spec.a2i_per_intent, 1.0);
  corpus.train = generate_split(spec, "train", spec.train_per_intent, spec.annotation_fraction);
  corpus.dev = generate_split(spec, "dev", spec.dev_per_intent, spec.annotation_fraction);
  corpus.test = generate_split(spec, "test", spec.test_per_intent, test_fraction);
  return corpus;
}

// ---------------------------------------------------------------------------
// File format

std::string base64_encode(std::span<const unsigned char> bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t triple = b0 << 16 | b1 << 8 | b2;
    out.push_back(kAlphabet[(triple >> 18) & 63]);
    out.push_back(kAlphabet[(triple >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? kAlphabet[(triple >> 6) & 63] : '=');
    out.push_back(i + 2 < bytes.size() ? kAlphabet[triple & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4");
  std::vector<unsigned char> out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = value(c)) < 0) throw ParseError("invalid base64 character");
    }
    const std::uint32_t triple = static_cast<std::uint32_t>(v[0] << 18 | v[1] << 12 | v[2] << 6 | v[3]);
    out.push_back(static_cast<unsigned char>(triple >> 16));
    if (pad < 2) out.push_back(static_cast<unsigned char>((triple >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<unsigned char>(triple & 0xff));
  }
  return out;
}

std::string utterance_to_line(const Utterance& utt, std::span<const std::string> intent_names) {
  const Tensor& f = utt.features.frames;
  std::vector<unsigned char> bytes;
  bytes.reserve(f.size() * 4);
  for (double v : f.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
  }
  json j;
  j["id"] = utt.id;
  j["transcript"] = utt.transcript;
  j["intent"] = utt.intent ? json(intent_names[*utt.intent]) : json(nullptr);
  j["annotated"] = utt.annotated;
  j["frame_period_ms"] = utt.features.frame_period_ms;
  j["features"] = {{"T", f.rows()}, {"D", f.cols()}, {"data", base64_encode(bytes)}};
  return j.dump();
}

Utterance utterance_from_line(const std::string& line, std::span<const std::string> intent_names, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(where + "malformed JSON (" + e.what() + ")");
  }
  std::string field = "id";
  try {
    Utterance u;
    u.id = j.at("id").get<std::string>();
    field = "transcript";
    u.transcript = j.at("transcript").get<std::string>();
    field = "intent";
    const json& intent = j.at("intent");
    if (!intent.is_null()) {
      const auto name = intent.get<std::string>();
      const auto it = std::find(intent_names.begin(), intent_names.end(), name);
      if (it == intent_names.end()) throw ParseError(where + "unknown intent '" + name + "'");
      u.intent = static_cast<std::size_t>(it - intent_names.begin());
    }
    field = "annotated";
    u.annotated = j.at("annotated").get<bool>();
    if (u.annotated && !u.intent) throw ParseError(where + "annotated utterance without an intent");
    field = "frame_period_ms";
    u.features.frame_period_ms = j.value("frame_period_ms", 30.0);
    u.features.source = FeatureSource::kSynthetic;
    field = "features";
    const json& feats = j.at("features");
    const std::size_t T = feats.at("T").get<std::size_t>();
    const std::size_t D = feats.at("D").get<std::size_t>();
    field = "features.data";
    std::vector<unsigned char> bytes;
    try {
      bytes = base64_decode(feats.at("data").get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(where + "field features.data: " + e.what());
    }
    if (bytes.size() != T * D * 4) throw ParseError(where + "field features.data: size does not match T x D");
    std::vector<double> values(T * D);
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[4 * k + static_cast<std::size_t>(i)]) << (8 * i);
      values[k] = static_cast<double>(std::bit_cast<float>(bits));
    }
    u.features.frames = Tensor(T, D, std::move(values));
    return u;
  } catch (const json::exception& e) {
    throw ParseError(where + "field " + field + ": " + e.what());
  }
}

void write_utterances(const std::filesystem::path& path, std::span<const Utterance> utts,
                      std::span<const std::string> intent_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& u : utts) out << utterance_to_line(u, intent_names) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<Utterance> read_utterances(const std::filesystem::path& path, std::span<const std::string> intent_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file '" + path.string() + "'");
  std::vector<Utterance> utts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    utts.push_back(utterance_from_line(line, intent_names, line_no));
  }
  return utts;
}

void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  write_utterances(dir / "a2i.jsonl", corpus.a2i, corpus.intent_names);
  write_utterances(dir / "train.jsonl", corpus.train, corpus.intent_names);
  write_utterances(dir / "dev.jsonl", corpus.dev, corpus.intent_names);
  write_utterances(dir / "test.jsonl", corpus.test, corpus.intent_names);
  json manifest{{"format", "intent-rnnt-corpus"},
                {"version", 1},
                {"seed", spec.seed},
                {"intents", corpus.intent_names},
                {"spec", spec},
                {"counts", {{"a2i", corpus.a2i.size()}, {"train", corpus.train.size()}, {"dev", corpus.dev.size()}, {"test", corpus.test.size()}}}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write corpus manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

Corpus read_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw IoError("corpus directory '" + dir.string() + "' has no manifest.json");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("corpus manifest: ") + e.what());
  }
  Corpus corpus;
  corpus.intent_names = manifest.at("intents").get<std::vector<std::string>>();
  corpus.a2i = read_utterances(dir / "a2i.jsonl", corpus.intent_names);
  corpus.train = read_utterances(dir / "train.jsonl", corpus.intent_names);
  corpus.dev = read_utterances(dir / "dev.jsonl", corpus.intent_names);
  corpus.test = read_utterances(dir / "test.jsonl", corpus.intent_names);
  return corpus;
}

}  // namespace intent_rnnt
