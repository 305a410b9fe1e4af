#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/autograd.hpp"
#include "ryolo/boxes.hpp"
#include "ryolo/convlstm.hpp"
#include "ryolo/error.hpp"
#include "ryolo/rng.hpp"
#include "ryolo/tensor.hpp"
#include "ryolo/tensor_ops.hpp"

namespace ryolo {

inline constexpr std::size_t kScales = 3;
inline constexpr std::size_t kAnchorsPerScale = 3;

// Three priors per scale; scale 0 is the finest grid.
struct AnchorSet {
  std::array<std::array<BoxShape, kAnchorsPerScale>, kScales> priors{};

  const std::array<BoxShape, kAnchorsPerScale>& at(std::size_t scale) const {
    return priors.at(scale);
  }

  void validate() const {
    for (const auto& scale : priors) {
      for (const auto& p : scale) {
        require(p.w > 0.0 && p.h > 0.0, ErrorKind::InvalidArgument,
                "anchor priors must be strictly positive");
      }
    }
  }

  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;
};

struct LstmConfig {
  std::size_t layers = 1;
  std::size_t kernel = 3;
  std::size_t hidden = 0;  // 0: same as the feature map it consumes
  double dropout = 0.0;

  friend bool operator==(const LstmConfig&, const LstmConfig&) = default;
};

struct DetectorConfig {
  std::size_t input_size = 104;
  std::size_t input_channels = 1;
  std::vector<std::size_t> backbone_widths{16, 32, 64, 128, 256};
  std::size_t num_classes = 4;
  bool recurrent = false;
  LstmConfig lstm;
  double leaky_slope = 0.1;
  // Optional explicit grid sizes; checked against the backbone geometry.
  std::vector<std::size_t> grid_sizes;

  // Backbone stages feeding the three heads: the last three.
  std::array<std::size_t, kScales> head_stages() const {
    const std::size_t n = backbone_widths.size();
    return {n - 3, n - 2, n - 1};
  }

  // Each stage halves the map with ceil rounding (104 -> 52 -> 26 -> 13 -> 7 -> 4).
  std::array<std::size_t, kScales> derived_grid_sizes() const {
    std::vector<std::size_t> sizes;
    std::size_t s = input_size;
    for (std::size_t i = 0; i < backbone_widths.size(); ++i) {
      s = (s + 1) / 2;
      sizes.push_back(s);
    }
    const auto stages = head_stages();
    return {sizes[stages[0]], sizes[stages[1]], sizes[stages[2]]};
  }

  std::size_t channels_per_anchor() const { return 5 + num_classes; }
  std::size_t head_channels() const { return kAnchorsPerScale * channels_per_anchor(); }

  void validate() const {
    require(backbone_widths.size() >= 3, ErrorKind::InvalidArgument,
            "detector needs at least 3 backbone stages");
    require(input_channels >= 1 && num_classes >= 1 && input_size >= 8,
            ErrorKind::InvalidArgument, "detector: bad input/class configuration");
    for (std::size_t w : backbone_widths) {
      require(w >= 1, ErrorKind::InvalidArgument, "backbone widths must be positive");
    }
    const auto g = derived_grid_sizes();
    require(g[0] > g[1] && g[1] > g[2] && g[2] >= 1, ErrorKind::Geometry,
            "grid sizes must be strictly decreasing, got " + std::to_string(g[0]) + "/" +
                std::to_string(g[1]) + "/" + std::to_string(g[2]));
    if (!grid_sizes.empty()) {
      require(grid_sizes.size() == kScales && grid_sizes[0] == g[0] && grid_sizes[1] == g[1] &&
                  grid_sizes[2] == g[2],
              ErrorKind::Geometry,
              "configured grid sizes do not match backbone geometry " + std::to_string(g[0]) +
                  "/" + std::to_string(g[1]) + "/" + std::to_string(g[2]));
    }
    require(lstm.layers >= 1 && lstm.kernel % 2 == 1, ErrorKind::InvalidArgument,
            "lstm: need >= 1 layer and an odd kernel");
    require(lstm.dropout >= 0.0 && lstm.dropout < 1.0, ErrorKind::InvalidArgument,
            "lstm: dropout must be in [0, 1)");
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct GridPrediction {
  std::size_t scale = 0;
  std::size_t grid = 0;
  Tensor4 raw;  // (1, B * (5 + C), S, S)
};

using DetectorState = std::array<ConvLSTMState, kScales>;

class Detector {
 public:
  Detector() = default;

  // All-zero weights.
  explicit Detector(DetectorConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t c_in = config_.input_channels;
    for (std::size_t w : config_.backbone_widths) {
      backbone_.emplace_back(w, c_in, 3);
      c_in = w;
    }
    const auto stages = config_.head_stages();
    for (std::size_t s = 0; s < kScales; ++s) {
      const std::size_t feat = config_.backbone_widths[stages[s]];
      std::size_t head_in = feat;
      if (config_.recurrent) {
        const std::size_t hidden = config_.lstm.hidden == 0 ? feat : config_.lstm.hidden;
        ConvLSTMStack stack;
        stack.dropout_rate = config_.lstm.dropout;
        std::size_t in = feat;
        for (std::size_t l = 0; l < config_.lstm.layers; ++l) {
          stack.layers.emplace_back(in, hidden, config_.lstm.kernel);
          in = hidden;
        }
        lstm_[s] = std::move(stack);
        head_in = hidden;
      }
      heads_[s] = ConvKernel(config_.head_channels(), head_in, 1);
    }
  }

  static Detector initialized(const DetectorConfig& config, Rng& rng) {
    Detector d(config);
    for (auto& k : d.backbone_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(k.c_in() * k.k() * k.k()));
      for (double& v : k.weight.values()) v = rng.uniform(-bound, bound);
    }
    for (std::size_t s = 0; s < kScales; ++s) {
      if (d.lstm_[s]) {
        for (auto& cell : d.lstm_[s]->layers) {
          cell = ConvLSTMCell::initialized(cell.c_in(), cell.hidden(), cell.k(), rng);
        }
      }
      auto& head = d.heads_[s];
      const double bound = 1.0 / std::sqrt(static_cast<double>(head.c_in()));
      for (double& v : head.weight.values()) v = rng.uniform(-bound, bound);
    }
    return d;
  }

  const DetectorConfig& config() const { return config_; }
  std::vector<ConvKernel>& backbone() { return backbone_; }
  const std::vector<ConvKernel>& backbone() const { return backbone_; }
  ConvKernel& head(std::size_t s) { return heads_.at(s); }
  const ConvKernel& head(std::size_t s) const { return heads_.at(s); }
  std::optional<ConvLSTMStack>& lstm(std::size_t s) { return lstm_.at(s); }
  const std::optional<ConvLSTMStack>& lstm(std::size_t s) const { return lstm_.at(s); }

  // Visits every trainable tensor in a fixed order with a stable name.
  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    visit(*this, fn);
  }
  template <typename Fn>
  void for_each_parameter(Fn&& fn) const {
    visit(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_parameter([&n](const std::string&, const Tensor4& t) { n += t.size(); });
    return n;
  }

  DetectorState fresh_state() const {
    DetectorState st;
    if (!config_.recurrent) return st;
    const auto grids = config_.derived_grid_sizes();
    for (std::size_t s = 0; s < kScales; ++s) st[s] = ryolo::fresh_state(*lstm_[s], grids[s], grids[s]);
    return st;
  }

  friend bool operator==(const Detector&, const Detector&) = default;

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn& fn) {
    for (std::size_t i = 0; i < self.backbone_.size(); ++i) {
      fn("backbone." + std::to_string(i) + ".weight", self.backbone_[i].weight);
      fn("backbone." + std::to_string(i) + ".bias", self.backbone_[i].bias);
    }
    for (std::size_t s = 0; s < kScales; ++s) {
      if (self.lstm_[s]) {
        for (std::size_t l = 0; l < self.lstm_[s]->layers.size(); ++l) {
          const std::string prefix = "lstm." + std::to_string(s) + "." + std::to_string(l) + ".";
          self.lstm_[s]->layers[l].for_each_parameter(
              [&](const std::string& name, auto& t) { fn(prefix + name, t); });
        }
      }
      fn("head." + std::to_string(s) + ".weight", self.heads_[s].weight);
      fn("head." + std::to_string(s) + ".bias", self.heads_[s].bias);
    }
  }

  DetectorConfig config_;
  std::vector<ConvKernel> backbone_;
  std::array<std::optional<ConvLSTMStack>, kScales> lstm_;
  std::array<ConvKernel, kScales> heads_;
};

// ---------------------------------------------------------------------------
// Graph forward. Backbone and heads see the chunk as a batch of frames; the
// recurrent layers walk it as one ordered sequence.

struct BoundDetector {
  std::vector<std::pair<Graph::Id, Graph::Id>> backbone;
  std::array<std::optional<BoundStack>, kScales> lstm;
  std::array<std::pair<Graph::Id, Graph::Id>, kScales> heads{};
  // Flat (name, tensor, node) list in for_each_parameter order.
  struct Param {
    std::string name;
    const Tensor4* tensor;
    Graph::Id node;
  };
  std::vector<Param> params;
};

inline BoundDetector bind(Graph& g, const Detector& model) {
  BoundDetector b;
  for (const auto& k : model.backbone()) {
    b.backbone.emplace_back(g.parameter(k.weight), g.parameter(k.bias));
  }
  for (std::size_t s = 0; s < kScales; ++s) {
    if (model.lstm(s)) b.lstm[s] = bind(g, *model.lstm(s));
    b.heads[s] = {g.parameter(model.head(s).weight), g.parameter(model.head(s).bias)};
  }
  // Graph ids were handed out in visit order: backbone, then per scale
  // lstm layers followed by the head.
  std::vector<Graph::Id> order;
  for (const auto& [w, bias] : b.backbone) {
    order.push_back(w);
    order.push_back(bias);
  }
  for (std::size_t s = 0; s < kScales; ++s) {
    if (b.lstm[s]) {
      for (const auto& cell : b.lstm[s]->cells) {
        order.insert(order.end(), cell.kernels.begin(), cell.kernels.end());
        order.insert(order.end(), cell.biases.begin(), cell.biases.end());
      }
    }
    order.push_back(b.heads[s].first);
    order.push_back(b.heads[s].second);
  }
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string& name, const Tensor4& t) {
    b.params.push_back({name, &t, order.at(i++)});
  });
  return b;
}

struct DetectorNodes {
  std::array<Graph::Id, kScales> raw{};  // (T, B * (5 + C), S, S)
};

using DetectorStateNodes = std::array<StateNodes, kScales>;

inline DetectorNodes forward(Graph& g, const Detector& model, const BoundDetector& bound,
                             Graph::Id frames, DetectorStateNodes* states, bool training,
                             Rng* dropout_rng) {
  const DetectorConfig& cfg = model.config();
  const Shape4 in = g.value(frames).shape();
  require(in.c == cfg.input_channels && in.h == cfg.input_size && in.w == cfg.input_size,
          ErrorKind::Geometry,
          "detector expects frames (T, " + std::to_string(cfg.input_channels) + ", " +
              std::to_string(cfg.input_size) + ", " + std::to_string(cfg.input_size) +
              "), got " + to_string(in));
  require(cfg.recurrent == (states != nullptr), ErrorKind::InvalidArgument,
          cfg.recurrent ? "recurrent detector needs per-scale states"
                        : "non-recurrent detector takes no states");

  std::vector<Graph::Id> stage_out;
  Graph::Id x = frames;
  for (const auto& [w, b] : bound.backbone) {
    x = g.conv2d(x, w, b, 1);
    x = g.leaky_relu(x, cfg.leaky_slope);
    x = g.max_pool2(x);
    stage_out.push_back(x);
  }

  DetectorNodes out;
  const auto stages = cfg.head_stages();
  for (std::size_t s = 0; s < kScales; ++s) {
    Graph::Id feat = stage_out[stages[s]];
    if (cfg.recurrent) {
      const std::size_t T = g.value(feat).n();
      std::vector<Graph::Id> hs;
      hs.reserve(T);
      for (std::size_t t = 0; t < T; ++t) {
        hs.push_back(step_stack(g, *bound.lstm[s], g.batch_slice(feat, t), (*states)[s],
                                training, dropout_rng));
      }
      feat = T == 1 ? hs.front() : g.batch_concat(hs);
    }
    out.raw[s] = g.conv2d(feat, bound.heads[s].first, bound.heads[s].second, 0);
  }
  return out;
}

inline void check_state(const Detector& model, const DetectorState& state) {
  const auto fresh = model.fresh_state();
  for (std::size_t s = 0; s < kScales; ++s) {
    require(state[s].layers.size() == fresh[s].layers.size(), ErrorKind::ShapeMismatch,
            "detector state layer count mismatch at scale " + std::to_string(s));
    for (std::size_t l = 0; l < fresh[s].layers.size(); ++l) {
      require(state[s].layers[l].h.shape() == fresh[s].layers[l].h.shape() &&
                  state[s].layers[l].c.shape() == fresh[s].layers[l].c.shape(),
              ErrorKind::ShapeMismatch,
              "detector state dims mismatch at scale " + std::to_string(s));
    }
  }
}

// Inference over an ordered batch of frames (T, C, H, W). Returns the three
// predictions of every frame. For recurrent models `state` must be present
// and is advanced once per frame.
inline std::vector<std::array<GridPrediction, kScales>> forward(
    const Detector& model, const Tensor4& frames, std::optional<DetectorState>& state) {
  const DetectorConfig& cfg = model.config();
  require(cfg.recurrent == state.has_value(), ErrorKind::InvalidArgument,
          cfg.recurrent ? "recurrent detector needs per-scale states"
                        : "non-recurrent detector takes no states");
  Graph g(false);
  const BoundDetector bound = bind(g, model);
  DetectorStateNodes nodes;
  if (state) {
    check_state(model, *state);
    for (std::size_t s = 0; s < kScales; ++s) nodes[s] = bind_state(g, (*state)[s]);
  }
  const DetectorNodes out =
      forward(g, model, bound, g.constant(frames), state ? &nodes : nullptr, false, nullptr);
  if (state) {
    for (std::size_t s = 0; s < kScales; ++s) (*state)[s] = read_state(g, nodes[s]);
  }
  const auto grids = cfg.derived_grid_sizes();
  std::vector<std::array<GridPrediction, kScales>> preds(frames.n());
  for (std::size_t t = 0; t < frames.n(); ++t) {
    for (std::size_t s = 0; s < kScales; ++s) {
      preds[t][s] = {s, grids[s], batch_slice(g.value(out.raw[s]), t)};
    }
  }
  return preds;
}

inline std::array<GridPrediction, kScales> forward_frame(const Detector& model,
                                                         const Tensor4& frame,
                                                         std::optional<DetectorState>& state) {
  require(frame.n() == 1, ErrorKind::InvalidArgument, "forward_frame: expected a single frame");
  return forward(model, frame, state).front();
}

// ---------------------------------------------------------------------------
// Decoding

// Raw channel of field `field` (0..4 box/objectness, 5.. classes) for anchor a.
inline std::size_t raw_channel(std::size_t num_classes, std::size_t anchor, std::size_t field) {
  return anchor * (5 + num_classes) + field;
}

inline std::vector<Detection> decode(const GridPrediction& pred,
                                     const std::array<BoxShape, kAnchorsPerScale>& anchors) {
  const Tensor4& raw = pred.raw;
  require(raw.c() % kAnchorsPerScale == 0 && raw.c() / kAnchorsPerScale > 5,
          ErrorKind::ShapeMismatch,
          "decode: channel count " + std::to_string(raw.c()) + " is not B * (5 + C)");
  require(raw.h() == pred.grid && raw.w() == pred.grid, ErrorKind::ShapeMismatch,
          "decode: raw map does not match grid size " + std::to_string(pred.grid));
  const std::size_t C = raw.c() / kAnchorsPerScale - 5;
  const double S = static_cast<double>(pred.grid);
  std::vector<Detection> dets;
  dets.reserve(kAnchorsPerScale * pred.grid * pred.grid);
  for (std::size_t row = 0; row < pred.grid; ++row) {
    for (std::size_t col = 0; col < pred.grid; ++col) {
      for (std::size_t a = 0; a < kAnchorsPerScale; ++a) {
        auto at = [&](std::size_t field) { return raw(0, raw_channel(C, a, field), row, col); };
        Detection d;
        d.box.cx = (sigmoid(at(0)) + static_cast<double>(col)) / S;
        d.box.cy = (sigmoid(at(1)) + static_cast<double>(row)) / S;
        d.box.w = anchors[a].w * std::exp(at(2));
        d.box.h = anchors[a].h * std::exp(at(3));
        double best = -1.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double p = sigmoid(at(5 + c));
          if (p > best) {
            best = p;
            d.class_id = static_cast<int>(c);
          }
        }
        d.confidence = sigmoid(at(4)) * best;
        dets.push_back(d);
      }
    }
  }
  return dets;
}

inline std::vector<Detection> decode_all(const std::array<GridPrediction, kScales>& preds,
                                         const AnchorSet& anchors) {
  std::vector<Detection> all;
  for (std::size_t s = 0; s < kScales; ++s) {
    auto d = decode(preds[s], anchors.at(s));
    all.insert(all.end(), d.begin(), d.end());
  }
  return all;
}

// Copies every same-named, same-shaped tensor from `from` into `to`; returns
// the number of tensors ported. Used to seed a recurrent model from a trained
// non-recurrent one.
inline std::size_t port_weights(const Detector& from, Detector& to) {
  std::vector<std::pair<std::string, const Tensor4*>> src;
  from.for_each_parameter([&](const std::string& n, const Tensor4& t) { src.emplace_back(n, &t); });
  std::size_t ported = 0;
  to.for_each_parameter([&](const std::string& n, Tensor4& t) {
    for (const auto& [name, ptr] : src) {
      if (name == n && ptr->shape() == t.shape()) {
        t = *ptr;
        ++ported;
        return;
      }
    }
  });
  return ported;
}

}  // namespace ryolo
