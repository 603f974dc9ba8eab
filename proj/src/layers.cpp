#include "intent_rnnt/layers.hpp"

#include <cmath>
#include <sstream>

#include "intent_rnnt/errors.hpp"
#include "intent_rnnt/math.hpp"

namespace intent_rnnt {

void init_uniform(Tensor& t, Rng& rng, double scale) {
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
}

Linear::Linear(std::size_t input_dim, std::size_t output_dim, Rng& rng)
    : weight(input_dim, output_dim), bias(1, output_dim) {
  init_uniform(weight, rng);
  init_uniform(bias, rng);
}

void Linear::step(std::span<const double> x, std::span<double> y) const {
  if (x.size() != input_dim() || y.size() != output_dim()) throw DimensionError("linear step shape mismatch");
  std::copy(bias.data().begin(), bias.data().end(), y.begin());
  accumulate_vec_mat(x, weight, y);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.cols() != input_dim()) {
    std::ostringstream msg;
    msg << "linear layer expects " << input_dim() << " inputs, got " << x.cols();
    throw DimensionError(msg.str());
  }
  Tensor y(x.rows(), output_dim());
  for (std::size_t t = 0; t < x.rows(); ++t) step(x.row(t), y.row(t));
  return y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& d_y) {
  if (d_y.rows() != x.rows() || d_y.cols() != output_dim()) throw DimensionError("linear backward shape mismatch");
  Tensor d_x(x.rows(), input_dim());
  auto gw = weight.grad();
  auto gb = bias.grad();
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto dy = d_y.row(t);
    for (std::size_t j = 0; j < dy.size(); ++j) gb[j] += dy[j];
    accumulate_outer(x.row(t), dy, gw, output_dim());
    accumulate_mat_vec(weight, dy, d_x.row(t));
  }
  return d_x;
}

void Linear::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Embedding::Embedding(std::size_t num_entries, std::size_t dim, Rng& rng) : table(num_entries, dim) {
  init_uniform(table, rng);
}

void Embedding::backward(std::span<const std::size_t> ids, const Tensor& d_rows) {
  if (d_rows.rows() != ids.size() || d_rows.cols() != dim()) throw DimensionError("embedding backward shape mismatch");
  auto g = table.grad();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto dr = d_rows.row(r);
    for (std::size_t j = 0; j < dim(); ++j) g[ids[r] * dim() + j] += dr[j];
  }
}

void Embedding::collect(const std::string& prefix, ParamList& out) { out.push_back({prefix + ".table", &table}); }

LstmLayer::LstmLayer(std::size_t input_dim, std::size_t hidden_dim, std::size_t proj_dim, Rng& rng)
    : w_input(input_dim, 4 * hidden_dim),
      w_recurrent(proj_dim > 0 ? proj_dim : hidden_dim, 4 * hidden_dim),
      bias(1, 4 * hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ArgumentError("lstm dimensions must be positive");
  init_uniform(w_input, rng);
  init_uniform(w_recurrent, rng);
  init_uniform(bias, rng);
  for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) bias(0, j) = kForgetBiasInit;
  if (proj_dim > 0) {
    projection = Tensor(hidden_dim, proj_dim);
    init_uniform(projection, rng);
  }
}

LstmLayer::State LstmLayer::initial_state() const {
  return {std::vector<double>(output_dim(), 0.0), std::vector<double>(hidden_dim(), 0.0)};
}

void LstmLayer::step_impl(std::span<const double> x, std::span<const double> h_prev,
                          std::span<const double> c_prev, std::span<double> gates, std::span<double> cell,
                          std::span<double> tanh_cell, std::span<double> hidden,
                          std::span<double> output) const {
  const std::size_t H = hidden_dim();
  std::copy(bias.data().begin(), bias.data().end(), gates.begin());
  accumulate_vec_mat(x, w_input, gates);
  accumulate_vec_mat(h_prev, w_recurrent, gates);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(gates[j]);
    const double f = sigmoid(gates[H + j]);
    const double g = std::tanh(gates[2 * H + j]);
    const double o = sigmoid(gates[3 * H + j]);
    gates[j] = i;
    gates[H + j] = f;
    gates[2 * H + j] = g;
    gates[3 * H + j] = o;
    cell[j] = f * c_prev[j] + i * g;
    tanh_cell[j] = std::tanh(cell[j]);
    hidden[j] = o * tanh_cell[j];
  }
  if (has_projection()) {
    std::fill(output.begin(), output.end(), 0.0);
    accumulate_vec_mat(hidden, projection, output);
  } else {
    std::copy(hidden.begin(), hidden.end(), output.begin());
  }
}

void LstmLayer::step(std::span<const double> x, State& state) const {
  if (x.size() != input_dim()) throw DimensionError("lstm step input size mismatch");
  const std::size_t H = hidden_dim();
  std::vector<double> gates(4 * H), cell(H), tanh_cell(H), hidden(H), output(output_dim());
  step_impl(x, state.h, state.c, gates, cell, tanh_cell, hidden, output);
  state.h = std::move(output);
  state.c = std::move(cell);
}

Tensor LstmLayer::forward(const Tensor& seq, Cache* cache) const {
  if (seq.cols() != input_dim()) {
    std::ostringstream msg;
    msg << "lstm expects input dim " << input_dim() << ", got " << seq.cols();
    throw DimensionError(msg.str());
  }
  const std::size_t T = seq.rows();
  const std::size_t H = hidden_dim();
  Cache local;
  Cache& c = cache ? *cache : local;
  c.gates = Tensor(T, 4 * H);
  c.cell = Tensor(T, H);
  c.tanh_cell = Tensor(T, H);
  c.hidden = Tensor(T, H);
  c.output = Tensor(T, output_dim());
  const std::vector<double> zero_h(output_dim(), 0.0), zero_c(H, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    std::span<const double> h_prev = t == 0 ? std::span<const double>(zero_h) : c.output.row(t - 1);
    std::span<const double> c_prev = t == 0 ? std::span<const double>(zero_c) : c.cell.row(t - 1);
    step_impl(seq.row(t), h_prev, c_prev, c.gates.row(t), c.cell.row(t), c.tanh_cell.row(t), c.hidden.row(t),
              c.output.row(t));
  }
  return c.output;
}

Tensor LstmLayer::backward(const Tensor& seq, const Cache& cache, const Tensor& d_out) {
  const std::size_t T = seq.rows();
  const std::size_t H = hidden_dim();
  const std::size_t P = output_dim();
  if (d_out.rows() != T || d_out.cols() != P) throw DimensionError("lstm backward shape mismatch");

  Tensor d_pre(T, 4 * H);
  std::vector<double> dh_next(P, 0.0), dc_next(H, 0.0), dh(P), dm(H);
  auto g_rec = w_recurrent.grad();
  auto g_bias = bias.grad();

  for (std::size_t step = T; step-- > 0;) {
    auto dout = d_out.row(step);
    for (std::size_t j = 0; j < P; ++j) dh[j] = dout[j] + dh_next[j];
    if (has_projection()) {
      accumulate_outer(cache.hidden.row(step), dh, projection.grad(), P);
      std::fill(dm.begin(), dm.end(), 0.0);
      accumulate_mat_vec(projection, dh, dm);
    } else {
      std::copy(dh.begin(), dh.end(), dm.begin());
    }
    auto gates = cache.gates.row(step);
    auto tc = cache.tanh_cell.row(step);
    auto da = d_pre.row(step);
    for (std::size_t j = 0; j < H; ++j) {
      const double i = gates[j], f = gates[H + j], g = gates[2 * H + j], o = gates[3 * H + j];
      const double c_prev = step == 0 ? 0.0 : cache.cell(step - 1, j);
      const double d_o = dm[j] * tc[j];
      const double dc = dm[j] * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
      const double d_i = dc * g;
      const double d_g = dc * i;
      const double d_f = dc * c_prev;
      dc_next[j] = dc * f;
      da[j] = d_i * i * (1.0 - i);
      da[H + j] = d_f * f * (1.0 - f);
      da[2 * H + j] = d_g * (1.0 - g * g);
      da[3 * H + j] = d_o * o * (1.0 - o);
    }
    for (std::size_t j = 0; j < 4 * H; ++j) g_bias[j] += da[j];
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    if (step > 0) {
      accumulate_outer(cache.output.row(step - 1), da, g_rec, 4 * H);
      accumulate_mat_vec(w_recurrent, da, dh_next);
    }
  }

  Tensor d_seq(T, input_dim());
  auto g_in = w_input.grad();
  for (std::size_t t = 0; t < T; ++t) {
    accumulate_outer(seq.row(t), d_pre.row(t), g_in, 4 * H);
    accumulate_mat_vec(w_input, d_pre.row(t), d_seq.row(t));
  }
  return d_seq;
}

void LstmLayer::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_recurrent", &w_recurrent});
  out.push_back({prefix + ".bias", &bias});
  if (has_projection()) out.push_back({prefix + ".projection", &projection});
}

Tensor forward_stack(const std::vector<LstmLayer>& layers, const Tensor& seq,
                     std::vector<LstmLayer::Cache>* caches) {
  if (caches) caches->assign(layers.size(), {});
  Tensor x = seq;
  for (std::size_t l = 0; l < layers.size(); ++l) x = layers[l].forward(x, caches ? &(*caches)[l] : nullptr);
  return x;
}

Tensor backward_stack(std::vector<LstmLayer>& layers, const Tensor& seq,
                      const std::vector<LstmLayer::Cache>& caches, const Tensor& d_out) {
  Tensor d = d_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Tensor& input = l == 0 ? seq : caches[l - 1].output;
    d = layers[l].backward(input, caches[l], d);
  }
  return d;
}

std::size_t param_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) p.tensor->zero_grad();
}

void enable_grads(const ParamList& params) {
  for (const auto& p : params)
    if (!p.tensor->has_grad()) p.tensor->enable_grad();
}

}  // namespace intent_rnnt
