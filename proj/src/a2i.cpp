#include "intent_rnnt/a2i.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/math.hpp"

namespace intent_rnnt {

using nlohmann::json;

std::string to_string(A2IObjective objective) {
  return objective == A2IObjective::kLastFrame ? "last_frame" : "every_frame";
}

A2IObjective parse_a2i_objective(std::string_view text) {
  if (text == "last_frame") return A2IObjective::kLastFrame;
  if (text == "every_frame") return A2IObjective::kEveryFrame;
  throw ConfigError("unknown A2I objective '" + std::string(text) + "'");
}

A2IModel::A2IModel(A2IConfig config) : config_(config) {
  if (config_.input_dim == 0 || config_.lstm_layers == 0 || config_.num_intents < 2 || config_.embedding_dim == 0)
    throw ConfigError("invalid A2I configuration");
  Rng rng(mix_seed(config_.seed, hash_string("a2i")));
  std::size_t in = config_.input_dim;
  for (std::size_t l = 0; l < config_.lstm_layers; ++l) {
    const bool last = l + 1 == config_.lstm_layers;
    lstms_.emplace_back(in, config_.lstm_units, last ? config_.embedding_dim : 0, rng);
    in = lstms_.back().output_dim();
  }
  dense_ = Linear(config_.embedding_dim, config_.num_intents, rng);
}

A2IOutput A2IModel::forward(const Tensor& frames) const {
  if (frames.cols() != config_.input_dim) {
    std::ostringstream msg;
    msg << "A2I model expects " << config_.input_dim << "-dim frames, got " << frames.cols();
    throw DimensionError(msg.str());
  }
  A2IOutput out;
  out.embeddings = forward_stack(lstms_, frames, nullptr);
  out.posteriors = dense_.forward(out.embeddings);
  for (std::size_t t = 0; t < out.posteriors.rows(); ++t) softmax_inplace(out.posteriors.row(t));
  if (out.embeddings.rows() > 0) {
    auto last = out.embeddings.row(out.embeddings.rows() - 1);
    out.final_embedding.assign(last.begin(), last.end());
  }
  return out;
}

A2IModel::Stream::Stream(const A2IModel& model) : model_(&model) {
  for (const auto& l : model.lstms_) states_.push_back(l.initial_state());
}

void A2IModel::Stream::step(std::span<const double> frame, std::vector<double>& embedding,
                            std::vector<double>& posterior) {
  std::span<const double> x = frame;
  for (std::size_t l = 0; l < model_->lstms_.size(); ++l) {
    model_->lstms_[l].step(x, states_[l]);
    x = states_[l].h;
  }
  embedding.assign(x.begin(), x.end());
  posterior.assign(model_->config_.num_intents, 0.0);
  model_->dense_.step(embedding, posterior);
  softmax_inplace(posterior);
}

double A2IModel::loss(const Tensor& frames, std::size_t label, A2IObjective objective, Tensor* d_input) {
  if (frames.cols() != config_.input_dim) throw DimensionError("A2I loss: input dimension mismatch");
  if (frames.rows() == 0) throw ArgumentError("A2I loss on an empty utterance");
  if (label >= config_.num_intents) throw ArgumentError("intent label out of range");
  auto params = this->params();
  enable_grads(params);

  std::vector<LstmLayer::Cache> caches;
  const Tensor embeddings = forward_stack(lstms_, frames, &caches);
  Tensor probs = dense_.forward(embeddings);
  const std::size_t T = frames.rows();
  Tensor d_logits(T, config_.num_intents);
  double total = 0.0;
  const std::size_t first = objective == A2IObjective::kLastFrame ? T - 1 : 0;
  const double weight = 1.0 / static_cast<double>(T - first);
  for (std::size_t t = first; t < T; ++t) {
    auto row = probs.row(t);
    const double lse = log_sum_exp(row);
    total -= row[label] - lse;
    auto d = d_logits.row(t);
    for (std::size_t k = 0; k < row.size(); ++k) d[k] = std::exp(row[k] - lse) * weight;
    d[label] -= weight;
  }
  const Tensor d_emb = dense_.backward(embeddings, d_logits);
  Tensor d_x = backward_stack(lstms_, frames, caches, d_emb);
  if (d_input) *d_input = std::move(d_x);
  return total * weight;
}

ParamList A2IModel::params() {
  ParamList out;
  for (std::size_t l = 0; l < lstms_.size(); ++l) lstms_[l].collect("a2i.lstm" + std::to_string(l), out);
  dense_.collect("a2i.dense", out);
  return out;
}

ConstParamList A2IModel::params() const {
  ConstParamList out;
  for (const auto& p : const_cast<A2IModel*>(this)->params()) out.push_back({p.name, p.tensor});
  return out;
}

std::size_t A2IModel::num_params() const {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.tensor->size();
  return n;
}

std::uint64_t A2IModel::checksum() const { return param_checksum(const_cast<A2IModel*>(this)->params()); }

namespace {

json config_to_json(const A2IConfig& c) {
  return json{{"kind", "a2i"},
              {"input_dim", c.input_dim},
              {"num_intents", c.num_intents},
              {"lstm_layers", c.lstm_layers},
              {"lstm_units", c.lstm_units},
              {"embedding_dim", c.embedding_dim},
              {"objective", to_string(c.objective)},
              {"seed", c.seed}};
}

}  // namespace

Checkpoint A2IModel::to_checkpoint() const {
  return checkpoint_from_params(config_to_json(config_).dump(), const_cast<A2IModel*>(this)->params());
}

A2IModel A2IModel::from_checkpoint(const Checkpoint& checkpoint) {
  json j;
  try {
    j = json::parse(checkpoint.config_json);
  } catch (const json::exception& e) {
    throw ParseError(std::string("A2I checkpoint config: ") + e.what());
  }
  if (j.value("kind", "") != "a2i") throw ConfigError("checkpoint does not hold an A2I model");
  A2IConfig c;
  c.input_dim = j.at("input_dim");
  c.num_intents = j.at("num_intents");
  c.lstm_layers = j.at("lstm_layers");
  c.lstm_units = j.at("lstm_units");
  c.embedding_dim = j.at("embedding_dim");
  c.objective = parse_a2i_objective(j.at("objective").get<std::string>());
  c.seed = j.at("seed");
  A2IModel model(c);
  load_params(checkpoint, model.params());
  return model;
}

double a2i_loss(A2IModel& model, const Utterance& utt, A2IObjective objective) {
  const auto label = utt.annotation();
  if (!label) throw ArgumentError("utterance '" + utt.id + "' has no intent annotation");
  return model.loss(utt.features.frames, *label, objective);
}

double accuracy(std::span<const Tensor> posteriors, std::span<const std::size_t> labels, AccuracyMode mode) {
  if (posteriors.size() != labels.size()) throw DimensionError("accuracy needs one label per posterior matrix");
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const Tensor& z = posteriors[i];
    const std::size_t T = z.rows();
    if (T == 0) continue;
    if (mode == AccuracyMode::kPerUtterance) {
      correct += argmax(z.row(T - 1)) == labels[i];
      ++total;
    } else {
      for (std::size_t t = 0; t < T; ++t) correct += argmax(z.row(t)) == labels[i];
      total += T;
    }
  }
  if (total == 0) throw ArgumentError("accuracy on a dataset without annotated utterances");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double accuracy(const A2IModel& model, std::span<const Utterance> dataset, AccuracyMode mode) {
  std::vector<Tensor> posteriors;
  std::vector<std::size_t> labels;
  for (const auto& utt : dataset) {
    const auto label = utt.annotation();
    if (!label) continue;
    posteriors.push_back(model.forward(utt.features).posteriors);
    labels.push_back(*label);
  }
  return accuracy(posteriors, labels, mode);
}

Tensor smooth_trajectory(const Tensor& posteriors, std::size_t window) {
  if (window == 0) throw ArgumentError("smoothing window must be positive");
  Tensor out(posteriors.rows(), posteriors.cols());
  for (std::size_t k = 0; k < posteriors.cols(); ++k) {
    for (std::size_t t = 0; t < posteriors.rows(); ++t) {
      const std::size_t begin = t + 1 >= window ? t + 1 - window : 0;
      double sum = 0.0;
      for (std::size_t s = begin; s <= t; ++s) sum += posteriors(s, k);
      out(t, k) = sum / static_cast<double>(t + 1 - begin);
    }
  }
  return out;
}

double convergence_ratio(const Tensor& posteriors, std::size_t intent) {
  const std::size_t T = posteriors.rows();
  if (T == 0) throw ArgumentError("convergence ratio of an empty trajectory");
  if (intent >= posteriors.cols()) throw ArgumentError("intent index out of range");
  const double threshold = kConvergenceThreshold * posteriors(T - 1, intent);
  for (std::size_t t = 0; t < T; ++t) {
    if (posteriors(t, intent) >= threshold) return static_cast<double>(t + 1) / static_cast<double>(T);
  }
  return 1.0;
}

std::size_t grid_frame(std::size_t grid_index, std::size_t num_frames) {
  const std::size_t frame = grid_index * num_frames / kAnalysisGridPoints;
  return std::min(frame, num_frames - 1);
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  stddev = std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

PosteriorReport analyze_posteriors(const A2IModel& model, std::span<const Utterance> dataset,
                                   std::span<const std::string> intent_names) {
  const std::size_t K = model.config().num_intents;
  if (intent_names.size() != K) throw ArgumentError("intent name list does not match the A2I model");
  std::vector<std::vector<std::vector<double>>> samples(K, std::vector<std::vector<double>>(kAnalysisGridPoints));
  std::vector<std::vector<double>> ratios(K);
  bool any_annotated = false;
  for (const auto& utt : dataset) {
    const auto label = utt.annotation();
    if (!label) continue;
    any_annotated = true;
    const A2IOutput out = model.forward(utt.features);
    const std::size_t T = out.posteriors.rows();
    if (T == 0 || argmax(out.posteriors.row(T - 1)) != *label) continue;
    const Tensor smoothed = smooth_trajectory(out.posteriors);
    for (std::size_t g = 0; g < kAnalysisGridPoints; ++g) samples[*label][g].push_back(smoothed(grid_frame(g, T), *label));
    ratios[*label].push_back(convergence_ratio(smoothed, *label));
  }
  if (!any_annotated) throw ArgumentError("posterior analysis on a dataset without annotated utterances");

  PosteriorReport report;
  report.intent_names.assign(intent_names.begin(), intent_names.end());
  for (std::size_t k = 0; k < K; ++k) {
    if (ratios[k].empty()) {
      report.notes.push_back("intent " + intent_names[k] + " omitted: no correctly predicted utterances");
      continue;
    }
    IntentCurve curve{k, ratios[k].size(), std::vector<double>(kAnalysisGridPoints),
                      std::vector<double>(kAnalysisGridPoints)};
    for (std::size_t g = 0; g < kAnalysisGridPoints; ++g) mean_std(samples[k][g], curve.mean[g], curve.stddev[g]);
    report.curves.push_back(std::move(curve));
    ConvergenceStats stats{k, ratios[k].size(), 0.0, 0.0};
    mean_std(ratios[k], stats.mean, stats.stddev);
    report.convergence.push_back(stats);
  }
  return report;
}

std::string PosteriorReport::curves_tsv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "intent\tnormalized_time\tcount\tmean\tstd\n";
  for (const auto& c : curves) {
    for (std::size_t g = 0; g < kAnalysisGridPoints; ++g) {
      out << intent_names[c.intent] << '\t' << static_cast<double>(g) / kAnalysisGridPoints << '\t' << c.count << '\t'
          << c.mean[g] << '\t' << c.stddev[g] << '\n';
    }
  }
  for (const auto& n : notes) out << "# " << n << '\n';
  return out.str();
}

std::string PosteriorReport::convergence_tsv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "intent\tcount\tmean_ratio\tstd_ratio\n";
  for (const auto& c : convergence)
    out << intent_names[c.intent] << '\t' << c.count << '\t' << c.mean << '\t' << c.stddev << '\n';
  for (const auto& n : notes) out << "# " << n << '\n';
  return out.str();
}

}  // namespace intent_rnnt
