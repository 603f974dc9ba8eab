#include "intent_rnnt/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "intent_rnnt/checkpoint.hpp"
#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string losses_tsv(const std::vector<double>& losses) {
  std::ostringstream out;
  out << "step\tloss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << '\t' << losses[i] << '\n';
  return out.str();
}

// Refuses a corpus generated from a different spec so that every stage of a
// run sees the same data.
Corpus load_corpus(const RunConfig& config) {
  const fs::path dir = corpus_dir(config);
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw ParseError("corpus manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("spec") || manifest.at("spec") != json(config.corpus))
    throw ConfigError("corpus in '" + dir.string() + "' was generated from a different spec; rerun generate-corpus");
  return read_corpus(dir);
}

A2IModel load_a2i(const RunConfig& config, A2IObjective objective) {
  const fs::path path = a2i_checkpoint_path(config, objective);
  A2IModel model = A2IModel::from_checkpoint(load_checkpoint(path));
  const A2IConfig expected = make_a2i_config(config, config.corpus.feature_dim, objective);
  const A2IConfig& got = model.config();
  if (got.input_dim != expected.input_dim || got.num_intents != expected.num_intents ||
      got.embedding_dim != expected.embedding_dim || got.lstm_units != expected.lstm_units ||
      got.lstm_layers != expected.lstm_layers)
    throw ConfigError("A2I checkpoint '" + path.string() + "' does not match the configured A2I model; rerun train-a2i");
  return model;
}

json policy_json(const ConditioningPolicy& policy) {
  return json{{"kind", to_string(policy.kind)},
              {"switch_fraction", policy.switch_fraction},
              {"conditioning_dim", policy.conditioning_dim}};
}

std::string percent(double fraction) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * fraction;
  return out.str();
}

}  // namespace

fs::path corpus_dir(const RunConfig& config) { return fs::path(config.out_dir) / "corpus"; }
fs::path a2i_dir(const RunConfig& config) { return fs::path(config.out_dir) / "a2i"; }

fs::path a2i_checkpoint_path(const RunConfig& config, A2IObjective objective) {
  return a2i_dir(config) / (to_string(objective) + ".ckpt");
}

fs::path rnnt_dir(const RunConfig& config, const ConditioningPolicy& policy) {
  return fs::path(config.out_dir) / "rnnt" / policy_tag(policy);
}

std::string policy_tag(const ConditioningPolicy& policy) {
  std::string tag = to_string(policy.kind);
  if (policy.kind == ConditioningKind::kHybridSwitch) {
    std::ostringstream f;
    f << policy.switch_fraction;
    tag += "_" + f.str();
  }
  return tag;
}

ConditioningPolicy policy_from_config(const RunConfig& config) {
  return ConditioningPolicy::make(config.conditioning.kind, config.a2i.embedding_dim, config.corpus.num_intents(),
                                  config.conditioning.switch_fraction);
}

void write_manifest(const fs::path& dir, const RunConfig& config, std::string_view command) {
  const json manifest{{"tool", "intent-rnnt"},
                      {"version", std::string(kToolVersion)},
                      {"command", std::string(command)},
                      {"config", json(config)}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::span<const Utterance> select_split(const Corpus& corpus, std::string_view split) {
  if (split == "a2i") return corpus.a2i;
  if (split == "train") return corpus.train;
  if (split == "dev") return corpus.dev;
  if (split == "test") return corpus.test;
  throw ArgumentError("unknown split '" + std::string(split) + "' (expected a2i, train, dev or test)");
}

void generate_corpus_command(const RunConfig& config, std::ostream& out) {
  const Corpus corpus = generate(config.corpus);
  const fs::path dir = corpus_dir(config);
  write_corpus(dir, config.corpus, corpus);
  out << "wrote " << corpus.a2i.size() << " a2i, " << corpus.train.size() << " train, " << corpus.dev.size()
      << " dev and " << corpus.test.size() << " test utterances to " << dir.string() << '\n';
}

void train_a2i_command(const RunConfig& config, std::ostream& out) {
  const Corpus corpus = load_corpus(config);
  const fs::path dir = a2i_dir(config);
  fs::create_directories(dir);
  std::ostringstream tsv, table;
  tsv << "objective\tper_utterance\tper_frame\n" << std::setprecision(17);
  table << std::left << std::setw(14) << "Objective" << std::setw(16) << "Per-utterance" << "Per-frame\n";
  for (const A2IObjective objective : {A2IObjective::kLastFrame, A2IObjective::kEveryFrame}) {
    std::vector<double> losses;
    const A2IModel model =
        train_a2i(make_a2i_config(config, config.corpus.feature_dim, objective), config.a2i.train, corpus.a2i, &losses);
    save_checkpoint(a2i_checkpoint_path(config, objective), model.to_checkpoint());
    write_text(dir / (to_string(objective) + "-losses.tsv"), losses_tsv(losses));
    const double utt = accuracy(model, corpus.dev, AccuracyMode::kPerUtterance);
    const double frame = accuracy(model, corpus.dev, AccuracyMode::kPerFrame);
    tsv << to_string(objective) << '\t' << utt << '\t' << frame << '\n';
    table << std::setw(14) << to_string(objective) << std::setw(16) << percent(utt) << percent(frame) << '\n';
  }
  write_text(dir / "accuracy.tsv", tsv.str());
  write_manifest(dir, config, "train-a2i");
  out << "A2I accuracy (%) on the dev split\n" << table.str();
}

fs::path train_rnnt_command(const RunConfig& config, std::ostream& out) {
  const ConditioningPolicy policy = policy_from_config(config);
  const Corpus corpus = load_corpus(config);
  const A2IObjective source = a2i_source_for(config.conditioning);
  std::optional<A2IModel> a2i;
  if (policy.needs_a2i()) a2i.emplace(load_a2i(config, source));
  std::optional<FrozenInferenceGuard> guard;
  if (a2i) guard.emplace(*a2i);

  const Vocabulary vocab = build_vocabulary(corpus.train, config.rnnt.vocab_size);
  const auto examples = prepare_examples(corpus.train, vocab, policy, a2i ? &*a2i : nullptr);
  const RnntConfig rc = make_rnnt_config(config, config.corpus.feature_dim + policy.conditioning_dim, vocab.size());
  std::vector<double> losses;
  const RnntModel model = train_rnnt(rc, config.rnnt.train, config.rnnt.augment, examples, &losses);
  if (guard) guard->verify();

  json metadata{{"policy", policy_json(policy)}, {"base_dim", config.corpus.feature_dim}};
  if (a2i) {
    metadata["a2i_source"] = to_string(source);
    metadata["a2i_checksum"] = guard->checksum();
  } else {
    metadata["a2i_source"] = nullptr;
    metadata["a2i_checksum"] = nullptr;
  }
  const fs::path dir = rnnt_dir(config, policy);
  fs::create_directories(dir);
  const fs::path ckpt = dir / "model.ckpt";
  save_checkpoint(ckpt, model.to_checkpoint(metadata.dump()));
  vocab.save(dir / "vocab.txt");
  write_text(dir / "losses.tsv", losses_tsv(losses));
  write_manifest(dir, config, "train-rnnt");
  out << "trained " << describe(policy) << " for " << losses.size() << " steps, final batch loss "
      << (losses.empty() ? 0.0 : losses.back()) << "; checkpoint " << ckpt.string() << '\n';
  return ckpt;
}

fs::path decode_command(const RunConfig& config, const DecodeRequest& request, std::ostream& out) {
  const ConditioningPolicy policy = policy_from_config(config);
  if (request.mode == DecodeMode::kStreaming && !policy.streamable())
    throw ConfigError("policy " + describe(policy) + " is not streamable; decode it with --mode offline");
  if (request.mode == DecodeMode::kStreaming && config.beam_width > 1)
    throw ArgumentError("streaming decoding is greedy; set beam_width to 1");

  const fs::path ckpt = request.checkpoint.value_or(rnnt_dir(config, policy) / "model.ckpt");
  std::string metadata_text;
  const RnntModel model = RnntModel::from_checkpoint(load_checkpoint(ckpt), &metadata_text);
  const json metadata = json::parse(metadata_text);
  if (!metadata.contains("policy") || metadata.at("policy") != policy_json(policy))
    throw ConfigError("checkpoint '" + ckpt.string() + "' was trained with policy " +
                      (metadata.contains("policy") ? metadata.at("policy").dump() : std::string("<none>")) +
                      " but the config selects " + policy_json(policy).dump());
  const Vocabulary vocab = Vocabulary::load(ckpt.parent_path() / "vocab.txt");

  std::optional<A2IModel> a2i;
  if (policy.needs_a2i()) {
    const A2IObjective source = parse_a2i_objective(metadata.at("a2i_source").get<std::string>());
    a2i.emplace(load_a2i(config, source));
    if (a2i->checksum() != metadata.at("a2i_checksum").get<std::uint64_t>())
      throw IntegrityError("A2I checkpoint changed since the transducer was trained");
  }

  const Corpus corpus = load_corpus(config);
  const auto utts = select_split(corpus, request.split);
  const auto hyps = decode_dataset(model, vocab, policy, a2i ? &*a2i : nullptr, utts, request.mode, config.beam_width);
  const fs::path path =
      request.output.value_or(ckpt.parent_path() / ("hyps-" + request.split + "-" + to_string(request.mode) + ".tsv"));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_hypotheses(path, hyps);
  out << "decoded " << hyps.size() << " " << request.split << " utterances (" << to_string(request.mode) << ") to "
      << path.string() << '\n';
  return path;
}

EvalReport evaluate_command(const RunConfig& config, const EvaluateRequest& request, std::ostream& out) {
  const ConditioningPolicy policy = policy_from_config(config);
  const fs::path dir = rnnt_dir(config, policy);
  const fs::path hyp_path = request.hypotheses.value_or(dir / ("hyps-" + request.split + "-offline.tsv"));
  const auto hyps = read_hypotheses(hyp_path);
  const Corpus corpus = load_corpus(config);
  const auto refs = references(select_split(corpus, request.split), corpus.intent_names);

  std::optional<EvalReport> baseline;
  if (request.baseline) baseline = EvalReport::from_json(read_text(*request.baseline));
  const EvalReport report =
      evaluate(refs, hyps, describe(policy), policy.streamable(), baseline ? &*baseline : nullptr);

  const fs::path prefix = request.output_prefix.value_or(dir / ("eval-" + request.split));
  write_text(fs::path(prefix.string() + ".json"), report.to_json());
  write_text(fs::path(prefix.string() + ".tsv"), report.to_tsv());
  write_text(fs::path(prefix.string() + ".txt"), report.to_table());
  out << report.to_table();
  return report;
}

void analyze_posteriors_command(const RunConfig& config, A2IObjective objective, std::string_view split,
                                std::ostream& out) {
  const A2IModel model = load_a2i(config, objective);
  const Corpus corpus = load_corpus(config);
  const PosteriorReport report = analyze_posteriors(model, select_split(corpus, split), corpus.intent_names);
  const fs::path dir = a2i_dir(config) / "posteriors";
  const std::string stem = to_string(objective) + "-" + std::string(split);
  write_text(dir / (stem + "-curves.tsv"), report.curves_tsv());
  write_text(dir / (stem + "-convergence.tsv"), report.convergence_tsv());
  out << "convergence ratio by intent (" << to_string(objective) << ", " << split << ")\n";
  out << std::left << std::setw(28) << "intent" << std::setw(8) << "count" << std::setw(10) << "mean" << "std\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& c : report.convergence)
    out << std::setw(28) << corpus.intent_names[c.intent] << std::setw(8) << c.count << std::setw(10) << c.mean
        << c.stddev << '\n';
  for (const auto& note : report.notes) out << "note: " << note << '\n';
  out << "curves and convergence tables written to " << dir.string() << '\n';
}

std::vector<SweepRow> sweep_hybrid_command(const RunConfig& config, std::ostream& out) {
  RunConfig base = config;
  base.conditioning.kind = ConditioningKind::kBaselineNone;
  base.conditioning.switch_fraction = 1.0;
  train_rnnt_command(base, out);
  decode_command(base, {}, out);
  const EvalReport baseline = evaluate_command(base, {}, out);
  const fs::path baseline_json = rnnt_dir(base, policy_from_config(base)) / "eval-test.json";

  std::vector<SweepRow> rows;
  for (double fraction : config.sweep_fractions) {
    RunConfig run = config;
    run.conditioning.kind = ConditioningKind::kHybridSwitch;
    run.conditioning.switch_fraction = fraction;
    train_rnnt_command(run, out);
    decode_command(run, {}, out);
    EvaluateRequest request;
    request.baseline = baseline_json;
    const EvalReport report = evaluate_command(run, request, out);
    rows.push_back({fraction, report.system, report.streamable, report.overall.wer(), report.werr.value_or(0.0)});
  }

  std::ostringstream tsv;
  tsv << "switch_fraction\tsystem\tstreamable\twer\twerr_percent\n" << std::setprecision(17);
  for (const auto& r : rows)
    tsv << r.fraction << '\t' << r.system << '\t' << (r.streamable ? "yes" : "no") << '\t' << r.wer << '\t' << r.werr
        << '\n';
  write_text(fs::path(config.out_dir) / "sweep_hybrid.tsv", tsv.str());

  out << "hybrid sweep (baseline WER " << percent(baseline.overall.wer()) << "%)\n";
  out << std::left << std::setw(18) << "e_t fraction (%)" << std::setw(12) << "WER (%)" << "WERR (%)\n";
  for (const auto& r : rows)
    out << std::setw(18) << std::lround(100.0 * r.fraction) << std::setw(12) << percent(r.wer) << std::fixed
        << std::setprecision(2) << r.werr << '\n';
  return rows;
}

}  // namespace intent_rnnt
