#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "intent_rnnt/random.hpp"
#include "intent_rnnt/tensor.hpp"

namespace intent_rnnt {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

struct NamedConstParam {
  std::string name;
  const Tensor* tensor;
};

using ParamList = std::vector<NamedParam>;
using ConstParamList = std::vector<NamedConstParam>;

inline constexpr double kInitScale = 0.1;
inline constexpr double kForgetBiasInit = 1.0;

void init_uniform(Tensor& t, Rng& rng, double scale = kInitScale);

// y = x W + b, with W stored input-major (in x out).
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t input_dim, std::size_t output_dim, Rng& rng);

  std::size_t input_dim() const { return weight.rows(); }
  std::size_t output_dim() const { return weight.cols(); }

  Tensor forward(const Tensor& x) const;
  void step(std::span<const double> x, std::span<double> y) const;
  // Accumulates parameter gradients and returns dL/dx.
  Tensor backward(const Tensor& x, const Tensor& d_y);

  void collect(const std::string& prefix, ParamList& out);

  Tensor weight;
  Tensor bias;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t num_entries, std::size_t dim, Rng& rng);

  std::size_t num_entries() const { return table.rows(); }
  std::size_t dim() const { return table.cols(); }

  std::span<const double> lookup(std::size_t id) const { return table.row(id); }
  void backward(std::span<const std::size_t> ids, const Tensor& d_rows);

  void collect(const std::string& prefix, ParamList& out);

  Tensor table;
};

// Unidirectional LSTM with sigmoid gates, tanh cell/output nonlinearities, no
// peepholes and an optional linear recurrent projection (LSTMP). Gate blocks
// are laid out [input, forget, cell, output] along the 4*hidden axis.
class LstmLayer {
 public:
  struct State {
    std::vector<double> h;
    std::vector<double> c;
  };

  // Per-step activations kept for backpropagation through time.
  struct Cache {
    Tensor gates;      // T x 4H, post-activation
    Tensor cell;       // T x H
    Tensor tanh_cell;  // T x H
    Tensor hidden;     // T x H, o * tanh(c) before projection
    Tensor output;     // T x output_dim
  };

  LstmLayer() = default;
  // proj_dim == 0 means no projection.
  LstmLayer(std::size_t input_dim, std::size_t hidden_dim, std::size_t proj_dim, Rng& rng);

  std::size_t input_dim() const { return w_input.rows(); }
  std::size_t hidden_dim() const { return bias.cols() / 4; }
  std::size_t output_dim() const { return has_projection() ? projection.cols() : hidden_dim(); }
  bool has_projection() const { return !projection.empty(); }

  State initial_state() const;
  // Advances `state` by one frame; state.h becomes the layer output.
  void step(std::span<const double> x, State& state) const;

  Tensor forward(const Tensor& seq, Cache* cache = nullptr) const;
  // Full BPTT from zero initial state. Accumulates parameter gradients and
  // returns dL/d(seq).
  Tensor backward(const Tensor& seq, const Cache& cache, const Tensor& d_out);

  void collect(const std::string& prefix, ParamList& out);

  Tensor w_input;      // input_dim x 4H
  Tensor w_recurrent;  // output_dim x 4H
  Tensor bias;         // 1 x 4H
  Tensor projection;   // H x P, empty when unprojected

 private:
  void step_impl(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
                 std::span<double> gates, std::span<double> cell, std::span<double> tanh_cell,
                 std::span<double> hidden, std::span<double> output) const;
};

// Runs a stack of layers over a sequence, keeping caches for backward.
Tensor forward_stack(const std::vector<LstmLayer>& layers, const Tensor& seq,
                     std::vector<LstmLayer::Cache>* caches);
Tensor backward_stack(std::vector<LstmLayer>& layers, const Tensor& seq,
                      const std::vector<LstmLayer::Cache>& caches, const Tensor& d_out);

std::size_t param_count(const ParamList& params);
void zero_grads(const ParamList& params);
void enable_grads(const ParamList& params);

}  // namespace intent_rnnt
