#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ryolo/autograd.hpp"
#include "ryolo/error.hpp"
#include "ryolo/rng.hpp"
#include "ryolo/tensor.hpp"

namespace ryolo {

// Kernel slots of the cell. The x* kernels read the input, h* the previous
// hidden map, c* the cell map (peepholes, as convolutions).
enum class CellKernel : std::size_t {
  xi, hi, ci, xf, hf, cf, xc, hc, xo, ho, co,
};
enum class CellBias : std::size_t { i, f, c, o };

inline constexpr std::size_t kCellKernels = 11;
inline constexpr std::size_t kCellBiases = 4;

inline constexpr std::array<std::string_view, kCellKernels> kCellKernelNames = {
    "w_xi", "w_hi", "w_ci", "w_xf", "w_hf", "w_cf",
    "w_xc", "w_hc", "w_xo", "w_ho", "w_co"};
inline constexpr std::array<std::string_view, kCellBiases> kCellBiasNames = {
    "b_i", "b_f", "b_c", "b_o"};

inline constexpr bool reads_input(CellKernel k) {
  return k == CellKernel::xi || k == CellKernel::xf || k == CellKernel::xc ||
         k == CellKernel::xo;
}

class ConvLSTMCell {
 public:
  ConvLSTMCell() = default;

  // All-zero cell.
  ConvLSTMCell(std::size_t c_in, std::size_t hidden, std::size_t k)
      : c_in_(c_in), hidden_(hidden), k_(k) {
    require(c_in >= 1 && hidden >= 1, ErrorKind::InvalidArgument,
            "ConvLSTMCell: channel counts must be positive");
    require(k % 2 == 1, ErrorKind::InvalidArgument,
            "ConvLSTMCell: kernel size must be odd, got " + std::to_string(k));
    for (std::size_t i = 0; i < kCellKernels; ++i) {
      const std::size_t src = reads_input(static_cast<CellKernel>(i)) ? c_in : hidden;
      kernels_[i] = Tensor4(hidden, src, k, k);
    }
    for (auto& b : biases_) b = Tensor4(1, hidden, 1, 1);
  }

  // Uniform(+-1/sqrt(fan_in)) weights, forget bias +1, other biases 0.
  static ConvLSTMCell initialized(std::size_t c_in, std::size_t hidden,
                                  std::size_t k, Rng& rng) {
    ConvLSTMCell cell(c_in, hidden, k);
    for (auto& w : cell.kernels_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.c() * k * k));
      for (double& v : w.values()) v = rng.uniform(-bound, bound);
    }
    cell.bias(CellBias::f).fill(1.0);
    return cell;
  }

  std::size_t c_in() const { return c_in_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t k() const { return k_; }

  Tensor4& kernel(CellKernel which) { return kernels_[static_cast<std::size_t>(which)]; }
  const Tensor4& kernel(CellKernel which) const {
    return kernels_[static_cast<std::size_t>(which)];
  }
  Tensor4& bias(CellBias which) { return biases_[static_cast<std::size_t>(which)]; }
  const Tensor4& bias(CellBias which) const {
    return biases_[static_cast<std::size_t>(which)];
  }

  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    for (std::size_t i = 0; i < kCellKernels; ++i) fn(std::string(kCellKernelNames[i]), kernels_[i]);
    for (std::size_t i = 0; i < kCellBiases; ++i) fn(std::string(kCellBiasNames[i]), biases_[i]);
  }
  template <typename Fn>
  void for_each_parameter(Fn&& fn) const {
    for (std::size_t i = 0; i < kCellKernels; ++i) fn(std::string(kCellKernelNames[i]), kernels_[i]);
    for (std::size_t i = 0; i < kCellBiases; ++i) fn(std::string(kCellBiasNames[i]), biases_[i]);
  }

  friend bool operator==(const ConvLSTMCell&, const ConvLSTMCell&) = default;

 private:
  std::size_t c_in_ = 0;
  std::size_t hidden_ = 0;
  std::size_t k_ = 1;
  std::array<Tensor4, kCellKernels> kernels_;
  std::array<Tensor4, kCellBiases> biases_;
};

// Closed form: 4 input kernels, 7 hidden/cell kernels, 4 biases.
inline std::size_t parameter_count(const ConvLSTMCell& cell) {
  const std::size_t h = cell.hidden(), c = cell.c_in(), k2 = cell.k() * cell.k();
  return 4 * h * c * k2 + 7 * h * h * k2 + 4 * h;
}

struct CellState {
  Tensor4 h;
  Tensor4 c;

  friend bool operator==(const CellState&, const CellState&) = default;
};

inline CellState fresh_cell_state(std::size_t hidden, std::size_t height,
                                  std::size_t width) {
  return {Tensor4(1, hidden, height, width), Tensor4(1, hidden, height, width)};
}

struct ConvLSTMStack {
  std::vector<ConvLSTMCell> layers;
  double dropout_rate = 0.0;

  void validate() const {
    require(!layers.empty(), ErrorKind::InvalidArgument, "ConvLSTMStack: no layers");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::InvalidArgument,
            "ConvLSTMStack: dropout rate must be in [0, 1)");
    for (std::size_t i = 1; i < layers.size(); ++i) {
      require(layers[i].c_in() == layers[i - 1].hidden(), ErrorKind::ShapeMismatch,
              "ConvLSTMStack: layer " + std::to_string(i) + " expects " +
                  std::to_string(layers[i].c_in()) + " input channels, previous layer has " +
                  std::to_string(layers[i - 1].hidden()) + " hidden");
    }
  }

  std::size_t input_channels() const { return layers.front().c_in(); }
  std::size_t output_channels() const { return layers.back().hidden(); }

  friend bool operator==(const ConvLSTMStack&, const ConvLSTMStack&) = default;
};

inline std::size_t parameter_count(const ConvLSTMStack& stack) {
  std::size_t total = 0;
  for (const auto& cell : stack.layers) total += parameter_count(cell);
  return total;
}

struct ConvLSTMState {
  std::vector<CellState> layers;

  friend bool operator==(const ConvLSTMState&, const ConvLSTMState&) = default;
};

inline ConvLSTMState fresh_state(const ConvLSTMStack& stack, std::size_t height,
                                 std::size_t width) {
  ConvLSTMState s;
  for (const auto& cell : stack.layers) s.layers.push_back(fresh_cell_state(cell.hidden(), height, width));
  return s;
}

// ---------------------------------------------------------------------------
// Graph-level building blocks shared by inference and training.

struct BoundCell {
  const ConvLSTMCell* cell = nullptr;
  std::array<Graph::Id, kCellKernels> kernels{};
  std::array<Graph::Id, kCellBiases> biases{};
  Graph::Id zero_bias = 0;

  Graph::Id kernel(CellKernel k) const { return kernels[static_cast<std::size_t>(k)]; }
  Graph::Id bias(CellBias b) const { return biases[static_cast<std::size_t>(b)]; }
};

inline BoundCell bind(Graph& g, const ConvLSTMCell& cell) {
  BoundCell b;
  b.cell = &cell;
  for (std::size_t i = 0; i < kCellKernels; ++i) b.kernels[i] = g.parameter(cell.kernel(static_cast<CellKernel>(i)));
  for (std::size_t i = 0; i < kCellBiases; ++i) b.biases[i] = g.parameter(cell.bias(static_cast<CellBias>(i)));
  b.zero_bias = g.constant(Tensor4(1, cell.hidden(), 1, 1));
  return b;
}

struct CellNodes {
  Graph::Id h;
  Graph::Id c;
};

namespace detail {
inline void check_step_dims(const ConvLSTMCell& cell, const Shape4& x,
                            const Shape4& h, const Shape4& c) {
  require(x.n == 1 && x.c == cell.c_in(), ErrorKind::ShapeMismatch,
          "ConvLSTM step: input " + to_string(x) + " does not match cell input channels " +
              std::to_string(cell.c_in()));
  const Shape4 want{1, cell.hidden(), x.h, x.w};
  require(h == want && c == want, ErrorKind::ShapeMismatch,
          "ConvLSTM step: state dims " + to_string(h) + "/" + to_string(c) + " expected " +
              to_string(want));
}
}  // namespace detail

// One time step:
//   i = s(Wxi*X + Whi*H + Wci*C_prev + b_i)
//   f = s(Wxf*X + Whf*H + Wcf*C_prev + b_f)
//   C = f o C_prev + i o tanh(Wxc*X + Whc*H + b_c)
//   o = s(Wxo*X + Who*H + Wco*C + b_o)      (peephole on the updated cell)
//   H = o o tanh(C)
inline CellNodes step(Graph& g, const BoundCell& p, Graph::Id x, Graph::Id h_prev,
                      Graph::Id c_prev) {
  const ConvLSTMCell& cell = *p.cell;
  detail::check_step_dims(cell, g.value(x).shape(), g.value(h_prev).shape(),
                          g.value(c_prev).shape());
  const std::size_t pad = same_padding(cell.k());
  auto conv = [&](Graph::Id in, CellKernel k, Graph::Id bias) {
    return g.conv2d(in, p.kernel(k), bias, pad);
  };
  auto sum3 = [&](Graph::Id a, Graph::Id b, Graph::Id c) { return g.add(g.add(a, b), c); };

  const Graph::Id i_gate = g.sigmoid(sum3(conv(x, CellKernel::xi, p.bias(CellBias::i)),
                                          conv(h_prev, CellKernel::hi, p.zero_bias),
                                          conv(c_prev, CellKernel::ci, p.zero_bias)));
  const Graph::Id f_gate = g.sigmoid(sum3(conv(x, CellKernel::xf, p.bias(CellBias::f)),
                                          conv(h_prev, CellKernel::hf, p.zero_bias),
                                          conv(c_prev, CellKernel::cf, p.zero_bias)));
  const Graph::Id candidate = g.tanh(g.add(conv(x, CellKernel::xc, p.bias(CellBias::c)),
                                           conv(h_prev, CellKernel::hc, p.zero_bias)));
  const Graph::Id c_new = g.add(g.mul(f_gate, c_prev), g.mul(i_gate, candidate));
  const Graph::Id o_gate = g.sigmoid(sum3(conv(x, CellKernel::xo, p.bias(CellBias::o)),
                                          conv(h_prev, CellKernel::ho, p.zero_bias),
                                          conv(c_new, CellKernel::co, p.zero_bias)));
  const Graph::Id h_new = g.mul(o_gate, g.tanh(c_new));
  return {h_new, c_new};
}

struct BoundStack {
  const ConvLSTMStack* stack = nullptr;
  std::vector<BoundCell> cells;
};

inline BoundStack bind(Graph& g, const ConvLSTMStack& stack) {
  BoundStack b;
  b.stack = &stack;
  for (const auto& cell : stack.layers) b.cells.push_back(bind(g, cell));
  return b;
}

// Per-layer state as graph nodes. Carried state enters a graph as constants,
// so gradients stop at the chunk boundary.
struct StateNodes {
  std::vector<CellNodes> layers;
};

inline StateNodes bind_state(Graph& g, const ConvLSTMState& state) {
  StateNodes s;
  for (const auto& l : state.layers) s.layers.push_back({g.constant(l.h), g.constant(l.c)});
  return s;
}

inline ConvLSTMState read_state(const Graph& g, const StateNodes& nodes) {
  ConvLSTMState s;
  for (const auto& l : nodes.layers) s.layers.push_back({g.value(l.h), g.value(l.c)});
  return s;
}

// Advances every layer by one frame; returns the top-layer hidden node.
// `dropout_rng` is only consulted when training with a nonzero rate.
inline Graph::Id step_stack(Graph& g, const BoundStack& bound, Graph::Id x,
                            StateNodes& state, bool training, Rng* dropout_rng) {
  const ConvLSTMStack& stack = *bound.stack;
  require(state.layers.size() == stack.layers.size(), ErrorKind::ShapeMismatch,
          "ConvLSTM state has " + std::to_string(state.layers.size()) + " layers, stack has " +
              std::to_string(stack.layers.size()));
  Graph::Id in = x;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    if (l > 0 && training && stack.dropout_rate > 0.0) {
      require(dropout_rng != nullptr, ErrorKind::InvalidArgument,
              "ConvLSTM dropout requires a random stream");
      Tensor4 mask(g.value(in).shape());
      const double keep = 1.0 - stack.dropout_rate;
      for (double& m : mask.values()) m = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      in = g.mul(in, g.constant(std::move(mask)));
    }
    const CellNodes next = step(g, bound.cells[l], in, state.layers[l].h, state.layers[l].c);
    state.layers[l] = next;
    in = next.h;
  }
  return in;
}

// ---------------------------------------------------------------------------
// Value-level API.

inline std::pair<Tensor4, CellState> step(const ConvLSTMCell& cell, const Tensor4& x,
                                          const CellState& state) {
  Graph g(false);
  const BoundCell p = bind(g, cell);
  const CellNodes out = step(g, p, g.constant(x), g.constant(state.h), g.constant(state.c));
  CellState next{g.value(out.h), g.value(out.c)};
  return {next.h, std::move(next)};
}

struct SequenceOutput {
  std::vector<Tensor4> outputs;
  ConvLSTMState state;
};

inline SequenceOutput forward_sequence(const ConvLSTMStack& stack,
                                       const std::vector<Tensor4>& frames,
                                       const ConvLSTMState& state, bool training,
                                       Rng* dropout_rng = nullptr) {
  require(!frames.empty(), ErrorKind::InvalidArgument, "forward_sequence: empty sequence");
  stack.validate();
  const Shape4 dims = frames.front().shape();
  for (const auto& f : frames) {
    require(f.shape() == dims, ErrorKind::ShapeMismatch,
            "forward_sequence: frame dims " + to_string(f.shape()) + " vs " + to_string(dims));
  }
  Graph g(false);
  const BoundStack bound = bind(g, stack);
  StateNodes nodes = bind_state(g, state);
  SequenceOutput out;
  for (const auto& f : frames) {
    const Graph::Id h = step_stack(g, bound, g.constant(f), nodes, training, dropout_rng);
    out.outputs.push_back(g.value(h));
  }
  out.state = read_state(g, nodes);
  return out;
}

}  // namespace ryolo
