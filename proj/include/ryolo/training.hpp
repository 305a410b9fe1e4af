#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ryolo/autograd.hpp"
#include "ryolo/boxes.hpp"
#include "ryolo/detector.hpp"
#include "ryolo/error.hpp"
#include "ryolo/rng.hpp"
#include "ryolo/tensor.hpp"

namespace ryolo {

// ---------------------------------------------------------------------------
// Target assignment

struct TargetAssignment {
  std::size_t label_index = 0;
  std::size_t scale = 0;
  std::size_t cell_x = 0;  // column, floor(cx * S)
  std::size_t cell_y = 0;  // row, floor(cy * S)
  std::size_t anchor = 0;
  double tx = 0.0;  // target for sigmoid(t_x), in [0, 1)
  double ty = 0.0;
  double tw = 0.0;  // target for t_w, log(w / prior_w)
  double th = 0.0;
  int class_id = 0;

  friend bool operator==(const TargetAssignment&, const TargetAssignment&) = default;
};

struct AssignmentResult {
  std::vector<TargetAssignment> targets;
  // Labels whose (scale, cell, anchor) slot was already taken by an earlier
  // label, in input order.
  std::vector<std::size_t> dropped;
};

// Each label goes to the (scale, anchor) prior of highest concentric IoU
// (first in scale-major order on ties) and to the cell holding its center.
inline AssignmentResult assign_targets(const std::vector<BoxLabel>& labels,
                                       const AnchorSet& anchors,
                                       const std::array<std::size_t, kScales>& grids) {
  AssignmentResult result;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Box& b = labels[i].box;
    if (!(b.w > 0.0 && b.h > 0.0)) {
      fail(ErrorKind::InvalidArgument,
           "assign_targets: label " + std::to_string(i) + " has zero area");
    }
    const BoxShape shape{b.w, b.h};
    std::size_t best_s = 0, best_a = 0;
    double best = -1.0;
    for (std::size_t s = 0; s < kScales; ++s) {
      for (std::size_t a = 0; a < kAnchorsPerScale; ++a) {
        const double v = shape_iou(shape, anchors.at(s)[a]);
        if (v > best) {
          best = v;
          best_s = s;
          best_a = a;
        }
      }
    }
    const double S = static_cast<double>(grids[best_s]);
    const std::size_t max_cell = grids[best_s] - 1;
    TargetAssignment t;
    t.label_index = i;
    t.scale = best_s;
    t.anchor = best_a;
    t.cell_x = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(b.cx * S))), max_cell);
    t.cell_y = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(b.cy * S))), max_cell);
    t.tx = b.cx * S - static_cast<double>(t.cell_x);
    t.ty = b.cy * S - static_cast<double>(t.cell_y);
    t.tw = std::log(b.w / anchors.at(best_s)[best_a].w);
    t.th = std::log(b.h / anchors.at(best_s)[best_a].h);
    t.class_id = labels[i].class_id;

    bool taken = false;
    for (const auto& o : result.targets) {
      if (o.scale == t.scale && o.anchor == t.anchor && o.cell_x == t.cell_x &&
          o.cell_y == t.cell_y) {
        taken = true;
        break;
      }
    }
    if (taken) {
      result.dropped.push_back(i);
    } else {
      result.targets.push_back(t);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Loss

struct LossWeights {
  double coord = 5.0;
  double obj = 1.0;
  double noobj = 0.5;
  double cls = 1.0;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double localization = 0.0;
  double confidence = 0.0;
  double classification = 0.0;
  double total = 0.0;
  LossWeights weights;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    localization += o.localization;
    confidence += o.confidence;
    classification += o.classification;
    total += o.total;
    return *this;
  }
};

struct LossAndGrad {
  LossBreakdown loss;
  std::array<Tensor4, kScales> grad;  // d total / d raw, per scale
};

// Sum-of-squares localization on (sigmoid(t_x), sigmoid(t_y), t_w, t_h),
// logistic objectness (target 1 on assigned slots, 0 elsewhere) and per-class
// logistic classification on assigned slots.
inline LossAndGrad detection_loss_with_grad(const std::array<GridPrediction, kScales>& preds,
                                            const std::vector<TargetAssignment>& targets,
                                            const LossWeights& weights = {}) {
  LossAndGrad out;
  out.loss.weights = weights;
  std::array<std::size_t, kScales> num_classes{};
  for (std::size_t s = 0; s < kScales; ++s) {
    const Tensor4& raw = preds[s].raw;
    require(raw.n() == 1 && raw.c() % kAnchorsPerScale == 0 &&
                raw.c() / kAnchorsPerScale > 5 && raw.h() == preds[s].grid &&
                raw.w() == preds[s].grid,
            ErrorKind::Geometry,
            "detection_loss: prediction " + std::to_string(s) + " has dims " +
                to_string(raw.shape()));
    num_classes[s] = raw.c() / kAnchorsPerScale - 5;
    out.grad[s] = Tensor4(raw.shape());
  }
  // Slot ownership per scale: index into targets or -1.
  std::array<std::vector<long>, kScales> owner;
  for (std::size_t s = 0; s < kScales; ++s) {
    owner[s].assign(kAnchorsPerScale * preds[s].grid * preds[s].grid, -1);
  }
  auto slot = [&](std::size_t s, std::size_t a, std::size_t y, std::size_t x) {
    return (a * preds[s].grid + y) * preds[s].grid + x;
  };
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    require(t.scale < kScales && t.anchor < kAnchorsPerScale && t.cell_x < preds[t.scale].grid &&
                t.cell_y < preds[t.scale].grid && t.class_id >= 0 &&
                static_cast<std::size_t>(t.class_id) < num_classes[t.scale],
            ErrorKind::Geometry,
            "detection_loss: target " + std::to_string(i) + " lies outside the prediction geometry");
    long& o = owner[t.scale][slot(t.scale, t.anchor, t.cell_y, t.cell_x)];
    require(o < 0, ErrorKind::Geometry,
            "detection_loss: two targets share one slot (target " + std::to_string(i) + ")");
    o = static_cast<long>(i);
  }

  double loc = 0.0, conf = 0.0, cls = 0.0;
  for (std::size_t s = 0; s < kScales; ++s) {
    const Tensor4& raw = preds[s].raw;
    Tensor4& grad = out.grad[s];
    const std::size_t C = num_classes[s];
    for (std::size_t a = 0; a < kAnchorsPerScale; ++a) {
      for (std::size_t y = 0; y < preds[s].grid; ++y) {
        for (std::size_t x = 0; x < preds[s].grid; ++x) {
          auto ch = [&](std::size_t field) { return raw_channel(C, a, field); };
          const double to = raw(0, ch(4), y, x);
          const long o = owner[s][slot(s, a, y, x)];
          if (o < 0) {
            conf += weights.noobj * softplus(to);
            grad(0, ch(4), y, x) = weights.noobj * sigmoid(to);
            continue;
          }
          const TargetAssignment& t = targets[static_cast<std::size_t>(o)];
          conf += weights.obj * softplus(-to);
          grad(0, ch(4), y, x) = weights.obj * (sigmoid(to) - 1.0);

          const double sx = sigmoid(raw(0, ch(0), y, x));
          const double sy = sigmoid(raw(0, ch(1), y, x));
          const double dw = raw(0, ch(2), y, x) - t.tw;
          const double dh = raw(0, ch(3), y, x) - t.th;
          loc += (sx - t.tx) * (sx - t.tx) + (sy - t.ty) * (sy - t.ty) + dw * dw + dh * dh;
          grad(0, ch(0), y, x) = weights.coord * 2.0 * (sx - t.tx) * sx * (1.0 - sx);
          grad(0, ch(1), y, x) = weights.coord * 2.0 * (sy - t.ty) * sy * (1.0 - sy);
          grad(0, ch(2), y, x) = weights.coord * 2.0 * dw;
          grad(0, ch(3), y, x) = weights.coord * 2.0 * dh;

          for (std::size_t c = 0; c < C; ++c) {
            const double z = raw(0, ch(5 + c), y, x);
            const bool positive = static_cast<int>(c) == t.class_id;
            cls += positive ? softplus(-z) : softplus(z);
            grad(0, ch(5 + c), y, x) = weights.cls * (sigmoid(z) - (positive ? 1.0 : 0.0));
          }
        }
      }
    }
  }
  out.loss.localization = loc;
  out.loss.confidence = conf;
  out.loss.classification = cls;
  out.loss.total = weights.coord * loc + conf + weights.cls * cls;
  return out;
}

inline LossBreakdown detection_loss(const std::array<GridPrediction, kScales>& preds,
                                    const std::vector<TargetAssignment>& targets,
                                    const LossWeights& weights = {}) {
  return detection_loss_with_grad(preds, targets, weights).loss;
}

// ---------------------------------------------------------------------------
// Gradients of a chunk

struct TrainBatch {
  Tensor4 frames;                            // (T, C, H, W), consecutive when recurrent
  std::vector<std::vector<BoxLabel>> labels;  // per frame
  std::vector<long> clip_ids;                // per frame
};

struct ChunkGradients {
  LossBreakdown loss;
  std::vector<Tensor4> grads;  // aligned with Detector::for_each_parameter
  std::size_t dropped_labels = 0;
};

namespace detail {
inline void check_batch(const Detector& model, const TrainBatch& batch, bool stateful) {
  const std::size_t T = batch.frames.n();
  require(batch.labels.size() == T && batch.clip_ids.size() == T, ErrorKind::InvalidArgument,
          "train batch: labels/clip ids must have one entry per frame");
  if (stateful) {
    for (long id : batch.clip_ids) {
      require(id == batch.clip_ids.front(), ErrorKind::InvalidArgument,
              "train batch: frames from different clips in one recurrent chunk");
    }
  }
  (void)model;
}
}  // namespace detail

// Forward + backward over one chunk. Per-frame losses are summed; carried
// states enter as constants (truncated backpropagation) and are advanced in
// place.
inline ChunkGradients compute_gradients(const Detector& model, const TrainBatch& batch,
                                        const AnchorSet& anchors,
                                        std::optional<DetectorState>& states,
                                        const LossWeights& weights, bool training, Rng* rng) {
  const DetectorConfig& cfg = model.config();
  require(cfg.recurrent == states.has_value(), ErrorKind::InvalidArgument,
          cfg.recurrent ? "recurrent training needs carried states"
                        : "non-recurrent training takes no states");
  detail::check_batch(model, batch, cfg.recurrent);

  Graph g(true);
  const BoundDetector bound = bind(g, model);
  DetectorStateNodes nodes;
  if (states) {
    check_state(model, *states);
    for (std::size_t s = 0; s < kScales; ++s) nodes[s] = bind_state(g, (*states)[s]);
  }
  const DetectorNodes raw = forward(g, model, bound, g.constant(batch.frames),
                                    states ? &nodes : nullptr, training, rng);
  const auto grids = cfg.derived_grid_sizes();

  ChunkGradients out;
  out.loss.weights = weights;
  std::array<Tensor4, kScales> seeds;
  for (std::size_t s = 0; s < kScales; ++s) seeds[s] = Tensor4(g.value(raw.raw[s]).shape());
  for (std::size_t t = 0; t < batch.frames.n(); ++t) {
    std::array<GridPrediction, kScales> preds;
    for (std::size_t s = 0; s < kScales; ++s) {
      preds[s] = {s, grids[s], batch_slice(g.value(raw.raw[s]), t)};
    }
    const AssignmentResult assigned = assign_targets(batch.labels[t], anchors, grids);
    out.dropped_labels += assigned.dropped.size();
    const LossAndGrad lg = detection_loss_with_grad(preds, assigned.targets, weights);
    out.loss += lg.loss;
    for (std::size_t s = 0; s < kScales; ++s) {
      const std::size_t len = lg.grad[s].size();
      auto dst = seeds[s].values().subspan(t * len, len);
      std::copy(lg.grad[s].values().begin(), lg.grad[s].values().end(), dst.begin());
    }
  }
  for (std::size_t s = 0; s < kScales; ++s) g.accumulate_grad(raw.raw[s], seeds[s]);
  g.backward();

  out.grads.reserve(bound.params.size());
  for (const auto& p : bound.params) out.grads.push_back(g.grad(p.node));
  if (states) {
    for (std::size_t s = 0; s < kScales; ++s) (*states)[s] = read_state(g, nodes[s]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double grad_clip_norm = 0.0;  // 0 disables clipping
  std::vector<std::string> frozen_prefixes;

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

inline bool is_frozen(const SgdConfig& cfg, const std::string& name) {
  for (const auto& p : cfg.frozen_prefixes) {
    if (name.compare(0, p.size(), p) == 0) return true;
  }
  return false;
}

// Heavy-ball SGD: v <- momentum * v + g;  p <- p - lr * v.
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig config) : config_(std::move(config)) {}

  const SgdConfig& config() const { return config_; }

  void apply(Detector& model, const std::vector<Tensor4>& grads) {
    std::vector<std::string> names;
    model.for_each_parameter([&](const std::string& n, const Tensor4&) { names.push_back(n); });
    require(grads.size() == names.size(), ErrorKind::ShapeMismatch,
            "optimizer: gradient count does not match parameter count");
    if (velocity_.empty()) {
      for (const auto& g : grads) velocity_.emplace_back(g.shape());
    }
    double scale = 1.0;
    if (config_.grad_clip_norm > 0.0) {
      double sq = 0.0;
      for (std::size_t i = 0; i < grads.size(); ++i) {
        if (is_frozen(config_, names[i])) continue;
        for (double v : grads[i].values()) sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm > config_.grad_clip_norm) scale = config_.grad_clip_norm / norm;
    }
    std::size_t i = 0;
    model.for_each_parameter([&](const std::string& name, Tensor4& p) {
      const std::size_t k = i++;
      if (is_frozen(config_, name)) return;
      auto pv = p.values();
      auto vv = velocity_[k].values();
      auto gv = grads[k].values();
      for (std::size_t j = 0; j < pv.size(); ++j) {
        const double g = scale * gv[j] + config_.weight_decay * pv[j];
        vv[j] = config_.momentum * vv[j] + g;
        pv[j] -= config_.learning_rate * vv[j];
      }
    });
    ++steps_;
  }

  std::size_t steps() const { return steps_; }

 private:
  SgdConfig config_;
  std::vector<Tensor4> velocity_;
  std::size_t steps_ = 0;
};

struct StepResult {
  LossBreakdown loss;
  std::size_t dropped_labels = 0;
};

// One optimizer update from one chunk.
inline StepResult train_step(Detector& model, const TrainBatch& batch, const AnchorSet& anchors,
                             std::optional<DetectorState>& states, SgdMomentum& optimizer,
                             const LossWeights& weights, Rng& rng) {
  ChunkGradients cg = compute_gradients(model, batch, anchors, states, weights, true, &rng);
  optimizer.apply(model, cg.grads);
  return {cg.loss, cg.dropped_labels};
}

}  // namespace ryolo
