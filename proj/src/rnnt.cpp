#include "intent_rnnt/rnnt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/math.hpp"

namespace intent_rnnt {

using nlohmann::json;

JointLattice::JointLattice(std::size_t frames, std::size_t label_positions, std::size_t vocab)
    : frames_(frames), label_positions_(label_positions), vocab_(vocab), values_(frames * label_positions * vocab, 0.0) {}

JointLattice JointLattice::from_logits(const Tensor& enc, const Tensor& pred) {
  if (enc.cols() != pred.cols()) throw DimensionError("encoder and prediction logits have different widths");
  JointLattice lattice(enc.rows(), pred.rows(), enc.cols());
  for (std::size_t t = 0; t < enc.rows(); ++t) {
    auto e = enc.row(t);
    for (std::size_t u = 0; u < pred.rows(); ++u) {
      auto p = pred.row(u);
      auto node = lattice.node(t, u);
      for (std::size_t k = 0; k < node.size(); ++k) node[k] = e[k] + p[k];
      log_softmax_inplace(node);
    }
  }
  return lattice;
}

RnntLossResult rnnt_loss(const JointLattice& lattice, std::span<const std::size_t> target, bool with_grad) {
  const std::size_t T = lattice.frames();
  const std::size_t U = target.size();
  const std::size_t V = lattice.vocab();
  if (T == 0) throw ArgumentError("transducer loss needs at least one frame");
  if (lattice.label_positions() != U + 1) {
    std::ostringstream msg;
    msg << "target of length " << U << " does not fit a lattice with " << lattice.label_positions()
        << " label positions";
    throw ArgumentError(msg.str());
  }
  for (std::size_t y : target)
    if (y == 0 || y >= V) throw ArgumentError("target token id out of range or blank");

  constexpr std::size_t blank = 0;
  const double neg_inf = -INFINITY;
  std::vector<double> alpha(T * (U + 1), neg_inf), beta(T * (U + 1), neg_inf);
  auto A = [&](std::size_t t, std::size_t u) -> double& { return alpha[t * (U + 1) + u]; };
  auto B = [&](std::size_t t, std::size_t u) -> double& { return beta[t * (U + 1) + u]; };

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) {
        A(0, 0) = 0.0;
        continue;
      }
      double a = neg_inf, b = neg_inf;
      if (t > 0) a = A(t - 1, u) + lattice.at(t - 1, u, blank);
      if (u > 0) b = A(t, u - 1) + lattice.at(t, u - 1, target[u - 1]);
      A(t, u) = log_add_exp(a, b);
    }
  }
  const double log_p = A(T - 1, U) + lattice.at(T - 1, U, blank);

  RnntLossResult result;
  result.loss = -log_p;
  if (!with_grad) return result;

  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t u = U + 1; u-- > 0;) {
      if (t == T - 1 && u == U) {
        B(t, u) = lattice.at(t, u, blank);
        continue;
      }
      double a = neg_inf, b = neg_inf;
      if (t + 1 < T) a = B(t + 1, u) + lattice.at(t, u, blank);
      if (u < U) b = B(t, u + 1) + lattice.at(t, u, target[u]);
      B(t, u) = log_add_exp(a, b);
    }
  }

  result.grad = JointLattice(T, U + 1, V);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u <= U; ++u) {
      const double next_blank = t + 1 < T ? B(t + 1, u) : (u == U ? 0.0 : neg_inf);
      if (next_blank != neg_inf)
        result.grad.at(t, u, blank) = -std::exp(A(t, u) + lattice.at(t, u, blank) + next_blank - log_p);
      if (u < U)
        result.grad.at(t, u, target[u]) = -std::exp(A(t, u) + lattice.at(t, u, target[u]) + B(t, u + 1) - log_p);
    }
  }
  return result;
}

void joint_backward(const JointLattice& lattice, const JointLattice& grad, Tensor& d_enc, Tensor& d_pred) {
  const std::size_t T = lattice.frames(), U1 = lattice.label_positions(), V = lattice.vocab();
  d_enc = Tensor(T, V);
  d_pred = Tensor(U1, V);
  std::vector<double> dz(V);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u < U1; ++u) {
      auto g = grad.node(t, u);
      auto lp = lattice.node(t, u);
      double g_sum = 0.0;
      for (double x : g) g_sum += x;
      auto de = d_enc.row(t);
      auto dp = d_pred.row(u);
      for (std::size_t k = 0; k < V; ++k) {
        const double d = g[k] - std::exp(lp[k]) * g_sum;
        de[k] += d;
        dp[k] += d;
      }
    }
  }
}

RnntModel::RnntModel(RnntConfig config) : config_(config) {
  if (config_.vocab_size < 2) throw ConfigError("vocabulary must contain blank and at least one token");
  if (config_.input_dim == 0 || config_.encoder_layers == 0 || config_.pred_layers == 0)
    throw ConfigError("invalid RNN-T configuration");
  Rng rng(mix_seed(config_.seed, hash_string("rnnt")));
  std::size_t in = config_.input_dim;
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    encoder_.emplace_back(in, config_.encoder_units, 0, rng);
    in = config_.encoder_units;
  }
  encoder_head_ = Linear(config_.encoder_units, config_.vocab_size, rng);
  pred_embedding_ = Embedding(config_.vocab_size, config_.pred_embedding_dim, rng);
  in = config_.pred_embedding_dim;
  for (std::size_t l = 0; l < config_.pred_layers; ++l) {
    pred_lstms_.emplace_back(in, config_.pred_units, 0, rng);
    in = config_.pred_units;
  }
  pred_head_ = Linear(config_.pred_units, config_.vocab_size, rng);
}

void RnntModel::check_tokens(std::span<const std::size_t> tokens) const {
  for (std::size_t y : tokens) {
    if (y == 0) throw ArgumentError("blank token in prediction-network history");
    if (y >= config_.vocab_size) throw ArgumentError("token id out of vocabulary range");
  }
}

Tensor RnntModel::encoder_forward(const Tensor& frames) const {
  if (frames.cols() != config_.input_dim) {
    std::ostringstream msg;
    msg << "encoder expects " << config_.input_dim << "-dim frames, got " << frames.cols();
    throw DimensionError(msg.str());
  }
  return encoder_head_.forward(forward_stack(encoder_, frames, nullptr));
}

namespace {

Tensor embed_history(const Embedding& embedding, std::span<const std::size_t> tokens, std::vector<std::size_t>& ids) {
  ids.assign(1, 0);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  Tensor x(ids.size(), embedding.dim());
  for (std::size_t u = 0; u < ids.size(); ++u) {
    auto row = embedding.lookup(ids[u]);
    std::copy(row.begin(), row.end(), x.row(u).begin());
  }
  return x;
}

}  // namespace

Tensor RnntModel::prediction_forward(std::span<const std::size_t> tokens) const {
  check_tokens(tokens);
  std::vector<std::size_t> ids;
  const Tensor x = embed_history(pred_embedding_, tokens, ids);
  return pred_head_.forward(forward_stack(pred_lstms_, x, nullptr));
}

RnntModel::EncoderStream::EncoderStream(const RnntModel& model) : model_(&model) {
  for (const auto& l : model.encoder_) states_.push_back(l.initial_state());
}

std::vector<double> RnntModel::EncoderStream::step(std::span<const double> frame) {
  if (frame.size() != model_->config_.input_dim) throw DimensionError("encoder stream: frame dimension mismatch");
  std::span<const double> x = frame;
  for (std::size_t l = 0; l < model_->encoder_.size(); ++l) {
    model_->encoder_[l].step(x, states_[l]);
    x = states_[l].h;
  }
  std::vector<double> logits(model_->config_.vocab_size);
  model_->encoder_head_.step(x, logits);
  return logits;
}

RnntModel::PredictionState RnntModel::prediction_start() const {
  PredictionState s;
  for (const auto& l : pred_lstms_) s.states.push_back(l.initial_state());
  std::span<const double> x = pred_embedding_.lookup(0);
  for (std::size_t l = 0; l < pred_lstms_.size(); ++l) {
    pred_lstms_[l].step(x, s.states[l]);
    x = s.states[l].h;
  }
  s.logits.resize(config_.vocab_size);
  pred_head_.step(x, s.logits);
  return s;
}

RnntModel::PredictionState RnntModel::prediction_advance(const PredictionState& state, std::size_t token) const {
  const std::size_t one[1] = {token};
  check_tokens(one);
  PredictionState s{state.states, {}};
  std::span<const double> x = pred_embedding_.lookup(token);
  for (std::size_t l = 0; l < pred_lstms_.size(); ++l) {
    pred_lstms_[l].step(x, s.states[l]);
    x = s.states[l].h;
  }
  s.logits.resize(config_.vocab_size);
  pred_head_.step(x, s.logits);
  return s;
}

double RnntModel::train_loss(const Tensor& frames, std::span<const std::size_t> target, Tensor* d_input) {
  if (frames.cols() != config_.input_dim) throw DimensionError("train_loss: input dimension mismatch");
  check_tokens(target);
  enable_grads(params());

  std::vector<LstmLayer::Cache> enc_caches;
  const Tensor enc_hidden = forward_stack(encoder_, frames, &enc_caches);
  const Tensor enc_logits = encoder_head_.forward(enc_hidden);

  std::vector<std::size_t> ids;
  const Tensor pred_x = embed_history(pred_embedding_, target, ids);
  std::vector<LstmLayer::Cache> pred_caches;
  const Tensor pred_hidden = forward_stack(pred_lstms_, pred_x, &pred_caches);
  const Tensor pred_logits = pred_head_.forward(pred_hidden);

  const JointLattice lattice = JointLattice::from_logits(enc_logits, pred_logits);
  const RnntLossResult result = rnnt_loss(lattice, target, true);

  Tensor d_enc, d_pred;
  joint_backward(lattice, result.grad, d_enc, d_pred);

  const Tensor d_enc_hidden = encoder_head_.backward(enc_hidden, d_enc);
  Tensor d_frames = backward_stack(encoder_, frames, enc_caches, d_enc_hidden);
  const Tensor d_pred_hidden = pred_head_.backward(pred_hidden, d_pred);
  const Tensor d_pred_x = backward_stack(pred_lstms_, pred_x, pred_caches, d_pred_hidden);
  pred_embedding_.backward(ids, d_pred_x);
  if (d_input) *d_input = std::move(d_frames);
  return result.loss;
}

ParamList RnntModel::params() {
  ParamList out;
  for (std::size_t l = 0; l < encoder_.size(); ++l) encoder_[l].collect("rnnt.encoder.lstm" + std::to_string(l), out);
  encoder_head_.collect("rnnt.encoder.head", out);
  pred_embedding_.collect("rnnt.prediction.embedding", out);
  for (std::size_t l = 0; l < pred_lstms_.size(); ++l)
    pred_lstms_[l].collect("rnnt.prediction.lstm" + std::to_string(l), out);
  pred_head_.collect("rnnt.prediction.head", out);
  return out;
}

ConstParamList RnntModel::params() const {
  ConstParamList out;
  for (const auto& p : const_cast<RnntModel*>(this)->params()) out.push_back({p.name, p.tensor});
  return out;
}

Checkpoint RnntModel::to_checkpoint(const std::string& metadata_json) const {
  const RnntConfig& c = config_;
  json j{{"kind", "rnnt"},
         {"config",
          {{"input_dim", c.input_dim},
           {"vocab_size", c.vocab_size},
           {"encoder_layers", c.encoder_layers},
           {"encoder_units", c.encoder_units},
           {"pred_embedding_dim", c.pred_embedding_dim},
           {"pred_layers", c.pred_layers},
           {"pred_units", c.pred_units},
           {"max_symbols_per_frame", c.max_symbols_per_frame},
           {"seed", c.seed}}},
         {"metadata", json::parse(metadata_json)}};
  return checkpoint_from_params(j.dump(), const_cast<RnntModel*>(this)->params());
}

RnntModel RnntModel::from_checkpoint(const Checkpoint& checkpoint, std::string* metadata_json) {
  json j;
  try {
    j = json::parse(checkpoint.config_json);
  } catch (const json::exception& e) {
    throw ParseError(std::string("RNN-T checkpoint config: ") + e.what());
  }
  if (j.value("kind", "") != "rnnt") throw ConfigError("checkpoint does not hold an RNN-T model");
  const json& cj = j.at("config");
  RnntConfig c;
  c.input_dim = cj.at("input_dim");
  c.vocab_size = cj.at("vocab_size");
  c.encoder_layers = cj.at("encoder_layers");
  c.encoder_units = cj.at("encoder_units");
  c.pred_embedding_dim = cj.at("pred_embedding_dim");
  c.pred_layers = cj.at("pred_layers");
  c.pred_units = cj.at("pred_units");
  c.max_symbols_per_frame = cj.at("max_symbols_per_frame");
  c.seed = cj.at("seed");
  RnntModel model(c);
  load_params(checkpoint, model.params());
  if (metadata_json) *metadata_json = j.value("metadata", json::object()).dump();
  return model;
}

std::size_t count_params(const RnntModel& model) {
  std::size_t n = 0;
  for (const auto& p : model.params()) n += p.tensor->size();
  return n;
}

RnntConfig widen_encoder_to(RnntConfig config, std::size_t target_params) {
  while (count_params(RnntModel(config)) < target_params) ++config.encoder_units;
  return config;
}

GreedySearch::GreedySearch(const RnntModel& model)
    : model_(&model), pred_(model.prediction_start()), joint_(model.config().vocab_size) {}

void GreedySearch::consume(std::span<const double> encoder_logits, std::size_t frame) {
  const std::size_t V = model_->config().vocab_size;
  if (encoder_logits.size() != V) throw DimensionError("greedy search: encoder logit width mismatch");
  for (std::size_t emitted = 0;; ++emitted) {
    for (std::size_t k = 0; k < V; ++k) joint_[k] = encoder_logits[k] + pred_.logits[k];
    log_softmax_inplace(joint_);
    const std::size_t best = emitted < model_->config().max_symbols_per_frame ? argmax(joint_) : 0;
    hyp_.log_prob += joint_[best];
    if (best == 0) return;
    hyp_.tokens.push_back(best);
    hyp_.frames.push_back(frame);
    pred_ = model_->prediction_advance(pred_, best);
  }
}

Hypothesis greedy_decode(const RnntModel& model, const Tensor& frames) {
  const Tensor enc = model.encoder_forward(frames);
  GreedySearch search(model);
  for (std::size_t t = 0; t < enc.rows(); ++t) search.consume(enc.row(t), t);
  return search.hypothesis();
}

namespace {

struct BeamEntry {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> frames;
  double log_prob = 0.0;
  double best_path = 0.0;  // score of the alignment whose frames are kept
  RnntModel::PredictionState pred;
  // For label candidates whose prediction state is not yet computed.
  const BeamEntry* parent = nullptr;
  std::size_t token = 0;
};

using BeamMap = std::map<std::vector<std::size_t>, BeamEntry>;

void merge_into(BeamMap& map, BeamEntry entry) {
  auto [it, inserted] = map.try_emplace(entry.tokens);
  if (inserted) {
    it->second = std::move(entry);
    return;
  }
  BeamEntry& existing = it->second;
  existing.log_prob = log_add_exp(existing.log_prob, entry.log_prob);
  if (entry.best_path > existing.best_path) {
    existing.best_path = entry.best_path;
    existing.frames = std::move(entry.frames);
  }
}

// Keeps the best `width` candidates across both maps. On equal scores,
// entries that already advanced (blank) win, then smaller label sequences.
void prune(BeamMap& finished, BeamMap& pending, std::size_t width) {
  if (width == 0 || finished.size() + pending.size() <= width) return;
  struct Ref {
    double score;
    bool is_pending;
    const std::vector<std::size_t>* tokens;
  };
  std::vector<Ref> refs;
  for (const auto& [k, e] : finished) refs.push_back({e.log_prob, false, &k});
  for (const auto& [k, e] : pending) refs.push_back({e.log_prob, true, &k});
  std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.is_pending != b.is_pending) return !a.is_pending;
    return *a.tokens < *b.tokens;
  });
  std::vector<std::vector<std::size_t>> drop_finished, drop_pending;
  for (std::size_t i = width; i < refs.size(); ++i)
    (refs[i].is_pending ? drop_pending : drop_finished).push_back(*refs[i].tokens);
  for (const auto& k : drop_finished) finished.erase(k);
  for (const auto& k : drop_pending) pending.erase(k);
}

}  // namespace

std::vector<Hypothesis> beam_search(const RnntModel& model, const Tensor& frames, std::size_t beam_width) {
  const Tensor enc = model.encoder_forward(frames);
  const std::size_t V = model.config().vocab_size;
  const std::size_t max_symbols = model.config().max_symbols_per_frame;

  BeamMap beam;
  {
    BeamEntry start;
    start.pred = model.prediction_start();
    beam.emplace(start.tokens, std::move(start));
  }
  std::vector<double> joint(V);
  for (std::size_t t = 0; t < enc.rows(); ++t) {
    auto e = enc.row(t);
    BeamMap active = std::move(beam);
    BeamMap finished;
    for (std::size_t round = 0; !active.empty(); ++round) {
      BeamMap pending;
      for (const auto& [tokens, h] : active) {
        for (std::size_t k = 0; k < V; ++k) joint[k] = e[k] + h.pred.logits[k];
        log_softmax_inplace(joint);
        BeamEntry advanced;
        advanced.tokens = h.tokens;
        advanced.frames = h.frames;
        advanced.log_prob = h.log_prob + joint[0];
        advanced.best_path = h.best_path + joint[0];
        advanced.pred = h.pred;
        merge_into(finished, std::move(advanced));
        if (round >= max_symbols) continue;
        for (std::size_t k = 1; k < V; ++k) {
          BeamEntry child;
          child.tokens = h.tokens;
          child.tokens.push_back(k);
          child.frames = h.frames;
          child.frames.push_back(t);
          child.log_prob = h.log_prob + joint[k];
          child.best_path = h.best_path + joint[k];
          child.parent = &h;
          child.token = k;
          merge_into(pending, std::move(child));
        }
      }
      prune(finished, pending, beam_width);
      for (auto& [tokens, c] : pending) {
        c.pred = model.prediction_advance(c.parent->pred, c.token);
        c.parent = nullptr;
      }
      active = std::move(pending);
    }
    beam = std::move(finished);
  }

  std::vector<Hypothesis> out;
  for (auto& [tokens, h] : beam) out.push_back({h.tokens, h.log_prob, h.frames});
  std::stable_sort(out.begin(), out.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
  return out;
}

}  // namespace intent_rnnt
