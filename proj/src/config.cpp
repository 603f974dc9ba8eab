#include "intent_rnnt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/random.hpp"

namespace intent_rnnt {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!names.contains(key)) throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const IntentSpec& v) {
  j = {{"name", v.name}, {"templates", v.templates}, {"slots", v.slots}};
}

void from_json(const json& j, IntentSpec& v) {
  check_keys(j, {"name", "templates", "slots"}, "corpus.intents");
  v.name = j.at("name").get<std::string>();
  read(j, "templates", v.templates);
  read(j, "slots", v.slots);
}

void to_json(json& j, const CorpusSpec& v) {
  json pairs = json::array();
  for (const auto& [a, b] : v.homophone_pairs) pairs.push_back({a, b});
  j = {{"intents", v.intents},
       {"shared_slots", v.shared_slots},
       {"homophone_pairs", pairs},
       {"a2i_per_intent", v.a2i_per_intent},
       {"train_per_intent", v.train_per_intent},
       {"dev_per_intent", v.dev_per_intent},
       {"test_per_intent", v.test_per_intent},
       {"annotation_fraction", v.annotation_fraction},
       {"test_annotation_fraction", v.test_annotation_fraction},
       {"noise_sigma", v.noise_sigma},
       {"intent_style_scale", v.intent_style_scale},
       {"feature_scale", v.feature_scale},
       {"feature_dim", v.feature_dim},
       {"frames_per_word", v.frames_per_word},
       {"seed", v.seed}};
}

void from_json(const json& j, CorpusSpec& v) {
  check_keys(j,
             {"intents", "shared_slots", "homophone_pairs", "a2i_per_intent", "train_per_intent", "dev_per_intent", "test_per_intent",
              "annotation_fraction", "test_annotation_fraction", "noise_sigma", "intent_style_scale", "feature_scale", "feature_dim",
              "frames_per_word", "seed"},
             "corpus");
  read(j, "intents", v.intents);
  read(j, "shared_slots", v.shared_slots);
  if (j.contains("homophone_pairs")) {
    v.homophone_pairs.clear();
    for (const json& p : j.at("homophone_pairs")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("homophone pairs must be two-word arrays");
      v.homophone_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
  }
  read(j, "a2i_per_intent", v.a2i_per_intent);
  read(j, "train_per_intent", v.train_per_intent);
  read(j, "dev_per_intent", v.dev_per_intent);
  read(j, "test_per_intent", v.test_per_intent);
  read(j, "annotation_fraction", v.annotation_fraction);
  read(j, "test_annotation_fraction", v.test_annotation_fraction);
  read(j, "noise_sigma", v.noise_sigma);
  read(j, "intent_style_scale", v.intent_style_scale);
  read(j, "feature_scale", v.feature_scale);
  read(j, "feature_dim", v.feature_dim);
  read(j, "frames_per_word", v.frames_per_word);
  read(j, "seed", v.seed);
}

void to_json(json& j, const AugmentPolicy& v) {
  j = {{"enabled", v.enabled},
       {"num_freq_masks", v.num_freq_masks},
       {"max_freq_width", v.max_freq_width},
       {"num_time_masks", v.num_time_masks},
       {"max_time_width", v.max_time_width},
       {"max_time_ratio", v.max_time_ratio}};
}

void from_json(const json& j, AugmentPolicy& v) {
  check_keys(j, {"enabled", "num_freq_masks", "max_freq_width", "num_time_masks", "max_time_width", "max_time_ratio"},
             "rnnt.augment");
  read(j, "enabled", v.enabled);
  read(j, "num_freq_masks", v.num_freq_masks);
  read(j, "max_freq_width", v.max_freq_width);
  read(j, "num_time_masks", v.num_time_masks);
  read(j, "max_time_width", v.max_time_width);
  read(j, "max_time_ratio", v.max_time_ratio);
}

void to_json(json& j, const TrainSettings& v) {
  j = {{"steps", v.steps},
       {"batch_size", v.batch_size},
       {"clip_norm", v.clip_norm},
       {"beta1", v.adam.beta1},
       {"beta2", v.adam.beta2},
       {"epsilon", v.adam.epsilon},
       {"peak_lr", v.adam.schedule.peak_lr},
       {"warmup_steps", v.adam.schedule.warmup_steps},
       {"constant_steps", v.adam.schedule.constant_steps},
       {"decay_rate", v.adam.schedule.decay_rate}};
}

void from_json(const json& j, TrainSettings& v) {
  check_keys(j,
             {"steps", "batch_size", "clip_norm", "beta1", "beta2", "epsilon", "peak_lr", "warmup_steps",
              "constant_steps", "decay_rate"},
             "train");
  read(j, "steps", v.steps);
  read(j, "batch_size", v.batch_size);
  read(j, "clip_norm", v.clip_norm);
  read(j, "beta1", v.adam.beta1);
  read(j, "beta2", v.adam.beta2);
  read(j, "epsilon", v.adam.epsilon);
  read(j, "peak_lr", v.adam.schedule.peak_lr);
  read(j, "warmup_steps", v.adam.schedule.warmup_steps);
  read(j, "constant_steps", v.adam.schedule.constant_steps);
  read(j, "decay_rate", v.adam.schedule.decay_rate);
  if (v.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(v.clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

void to_json(json& j, const RunConfig& v) {
  j = {{"seed", v.seed},
       {"out_dir", v.out_dir},
       {"corpus", v.corpus},
       {"a2i",
        {{"lstm_layers", v.a2i.lstm_layers},
         {"lstm_units", v.a2i.lstm_units},
         {"embedding_dim", v.a2i.embedding_dim},
         {"train", v.a2i.train}}},
       {"rnnt",
        {{"vocab_size", v.rnnt.vocab_size},
         {"encoder_layers", v.rnnt.encoder_layers},
         {"encoder_units", v.rnnt.encoder_units},
         {"pred_embedding_dim", v.rnnt.pred_embedding_dim},
         {"pred_layers", v.rnnt.pred_layers},
         {"pred_units", v.rnnt.pred_units},
         {"max_symbols_per_frame", v.rnnt.max_symbols_per_frame},
         {"train", v.rnnt.train},
         {"augment", v.rnnt.augment}}},
       {"conditioning",
        {{"kind", to_string(v.conditioning.kind)},
         {"switch_fraction", v.conditioning.switch_fraction},
         {"a2i_source", v.conditioning.a2i_source ? to_string(*v.conditioning.a2i_source) : "auto"}}},
       {"beam_width", v.beam_width},
       {"sweep_fractions", v.sweep_fractions}};
}

void from_json(const json& j, RunConfig& v) {
  check_keys(j, {"seed", "out_dir", "corpus", "a2i", "rnnt", "conditioning", "beam_width", "sweep_fractions"}, "root");
  read(j, "seed", v.seed);
  read(j, "out_dir", v.out_dir);
  if (j.contains("corpus")) from_json(j.at("corpus"), v.corpus);
  if (j.contains("a2i")) {
    const json& a = j.at("a2i");
    check_keys(a, {"lstm_layers", "lstm_units", "embedding_dim", "train"}, "a2i");
    read(a, "lstm_layers", v.a2i.lstm_layers);
    read(a, "lstm_units", v.a2i.lstm_units);
    read(a, "embedding_dim", v.a2i.embedding_dim);
    if (a.contains("train")) from_json(a.at("train"), v.a2i.train);
  }
  if (j.contains("rnnt")) {
    const json& r = j.at("rnnt");
    check_keys(r,
               {"vocab_size", "encoder_layers", "encoder_units", "pred_embedding_dim", "pred_layers", "pred_units",
                "max_symbols_per_frame", "train", "augment"},
               "rnnt");
    read(r, "vocab_size", v.rnnt.vocab_size);
    read(r, "encoder_layers", v.rnnt.encoder_layers);
    read(r, "encoder_units", v.rnnt.encoder_units);
    read(r, "pred_embedding_dim", v.rnnt.pred_embedding_dim);
    read(r, "pred_layers", v.rnnt.pred_layers);
    read(r, "pred_units", v.rnnt.pred_units);
    read(r, "max_symbols_per_frame", v.rnnt.max_symbols_per_frame);
    if (r.contains("train")) from_json(r.at("train"), v.rnnt.train);
    if (r.contains("augment")) from_json(r.at("augment"), v.rnnt.augment);
  }
  if (j.contains("conditioning")) {
    const json& c = j.at("conditioning");
    check_keys(c, {"kind", "switch_fraction", "a2i_source"}, "conditioning");
    if (c.contains("a2i_source")) {
      const auto source = c.at("a2i_source").get<std::string>();
      v.conditioning.a2i_source.reset();
      if (source != "auto") v.conditioning.a2i_source = parse_a2i_objective(source);
    }
    if (c.contains("kind")) v.conditioning.kind = parse_conditioning_kind(c.at("kind").get<std::string>());
    read(c, "switch_fraction", v.conditioning.switch_fraction);
    if (!(v.conditioning.switch_fraction >= 0.0 && v.conditioning.switch_fraction <= 1.0))
      throw ConfigError("conditioning.switch_fraction must lie in [0, 1]");
  }
  read(j, "beam_width", v.beam_width);
  read(j, "sweep_fractions", v.sweep_fractions);
  for (double p : v.sweep_fractions)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep fractions must lie in [0, 1]");
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    RunConfig config;
    from_json(j, config);
    return config;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string dump_run_config(const RunConfig& config) { return json(config).dump(2); }

std::uint64_t derived_seed(const RunConfig& config, std::string_view role) {
  return mix_seed(config.seed, hash_string(role));
}

A2IObjective a2i_source_for(const ConditioningSection& section) {
  if (section.a2i_source) return *section.a2i_source;
  return section.kind == ConditioningKind::kPerFramePosterior ? A2IObjective::kEveryFrame : A2IObjective::kLastFrame;
}

A2IConfig make_a2i_config(const RunConfig& config, std::size_t input_dim, A2IObjective objective) {
  A2IConfig c;
  c.input_dim = input_dim;
  c.num_intents = config.corpus.num_intents();
  c.lstm_layers = config.a2i.lstm_layers;
  c.lstm_units = config.a2i.lstm_units;
  c.embedding_dim = config.a2i.embedding_dim;
  c.objective = objective;
  c.seed = derived_seed(config, "a2i:" + to_string(objective));
  return c;
}

RnntConfig make_rnnt_config(const RunConfig& config, std::size_t input_dim, std::size_t vocab_size) {
  RnntConfig c;
  c.input_dim = input_dim;
  c.vocab_size = vocab_size;
  c.encoder_layers = config.rnnt.encoder_layers;
  c.encoder_units = config.rnnt.encoder_units;
  c.pred_embedding_dim = config.rnnt.pred_embedding_dim;
  c.pred_layers = config.rnnt.pred_layers;
  c.pred_units = config.rnnt.pred_units;
  c.max_symbols_per_frame = config.rnnt.max_symbols_per_frame;
  c.seed = derived_seed(config, "rnnt");
  return c;
}

}  // namespace intent_rnnt
