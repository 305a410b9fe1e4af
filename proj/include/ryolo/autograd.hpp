#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/tensor.hpp"
#include "ryolo/tensor_ops.hpp"

namespace ryolo {

// Reverse-mode tape over Tensor4 values. Nodes are appended in evaluation
// order, so a reverse sweep is a valid topological order. Parameters are
// referenced, not copied; they must outlive the graph.
class Graph {
 public:
  using Id = std::size_t;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Id constant(Tensor4 value) { return push(std::move(value), nullptr, false); }

  Id input(Tensor4 value, bool requires_grad) {
    return push(std::move(value), nullptr, requires_grad && record_);
  }

  Id parameter(const Tensor4& value) {
    return push(Tensor4(), &value, record_);
  }

  const Tensor4& value(Id id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.owned;
  }

  bool requires_grad(Id id) const { return nodes_[id].requires_grad; }

  // Gradient accumulated at a node; zeros if nothing reached it.
  Tensor4 grad(Id id) const {
    const Node& n = nodes_[id];
    if (n.grad) return *n.grad;
    return Tensor4(value(id).shape());
  }

  void accumulate_grad(Id id, const Tensor4& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    require(g.shape() == value(id).shape(), ErrorKind::ShapeMismatch,
            "gradient dims " + to_string(g.shape()) + " vs value dims " +
                to_string(value(id).shape()));
    if (!n.grad) {
      n.grad = g;
    } else {
      auto dst = n.grad->values();
      auto src = g.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }

  void backward() {
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad && n.backward) n.backward(*this, *n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- operations --------------------------------------------------------

  Id conv2d(Id x, Id weight, Id bias, std::size_t padding) {
    Tensor4 out = ryolo::conv2d(value(x), value(weight), value(bias), padding);
    return push_op(std::move(out), {x, weight, bias},
                   [x, weight, bias, padding](Graph& g, const Tensor4& go) {
                     if (g.requires_grad(x)) {
                       g.accumulate_grad(x, conv2d_backward_input(
                                                g.value(x).shape(), g.value(weight),
                                                go, padding));
                     }
                     if (g.requires_grad(weight) || g.requires_grad(bias)) {
                       Tensor4 gw(g.value(weight).shape());
                       Tensor4 gb(g.value(bias).shape());
                       conv2d_backward_kernel(g.value(x), go, padding, gw, gb);
                       g.accumulate_grad(weight, gw);
                       g.accumulate_grad(bias, gb);
                     }
                   });
  }

  Id sigmoid(Id x) {
    Tensor4 out = ryolo::sigmoid(value(x));
    const Id self = nodes_.size();
    return push_op(std::move(out), {x}, [x, self](Graph& g, const Tensor4& go) {
      const Tensor4& y = g.value(self);
      g.accumulate_grad(x, zip(go, y, [](double d, double s) { return d * s * (1.0 - s); },
                               "sigmoid_backward"));
    });
  }

  Id tanh(Id x) {
    Tensor4 out = ryolo::tanh(value(x));
    const Id self = nodes_.size();
    return push_op(std::move(out), {x}, [x, self](Graph& g, const Tensor4& go) {
      const Tensor4& y = g.value(self);
      g.accumulate_grad(x, zip(go, y, [](double d, double t) { return d * (1.0 - t * t); },
                               "tanh_backward"));
    });
  }

  Id leaky_relu(Id x, double slope) {
    Tensor4 out = ryolo::leaky_relu(value(x), slope);
    return push_op(std::move(out), {x}, [x, slope](Graph& g, const Tensor4& go) {
      g.accumulate_grad(x, zip(go, g.value(x),
                               [slope](double d, double v) { return v > 0.0 ? d : slope * d; },
                               "leaky_relu_backward"));
    });
  }

  Id mul(Id a, Id b) {
    Tensor4 out = hadamard(value(a), value(b));
    return push_op(std::move(out), {a, b}, [a, b](Graph& g, const Tensor4& go) {
      if (g.requires_grad(a)) g.accumulate_grad(a, hadamard(go, g.value(b)));
      if (g.requires_grad(b)) g.accumulate_grad(b, hadamard(go, g.value(a)));
    });
  }

  Id add(Id a, Id b) {
    Tensor4 out = ryolo::add(value(a), value(b));
    return push_op(std::move(out), {a, b}, [a, b](Graph& g, const Tensor4& go) {
      g.accumulate_grad(a, go);
      g.accumulate_grad(b, go);
    });
  }

  Id max_pool2(Id x) {
    Tensor4 out = ryolo::max_pool2(value(x));
    return push_op(std::move(out), {x}, [x](Graph& g, const Tensor4& go) {
      g.accumulate_grad(x, max_pool2_backward(g.value(x), go));
    });
  }

  Id batch_slice(Id x, std::size_t index) {
    Tensor4 out = ryolo::batch_slice(value(x), index);
    return push_op(std::move(out), {x}, [x, index](Graph& g, const Tensor4& go) {
      Tensor4 full(g.value(x).shape());
      const std::size_t len = go.size();
      auto dst = full.values().subspan(index * len, len);
      auto src = go.values();
      std::copy(src.begin(), src.end(), dst.begin());
      g.accumulate_grad(x, full);
    });
  }

  Id batch_concat(const std::vector<Id>& parts) {
    std::vector<const Tensor4*> ptrs;
    ptrs.reserve(parts.size());
    for (Id p : parts) ptrs.push_back(&value(p));
    Tensor4 out = ryolo::batch_concat(ptrs);
    return push_op(std::move(out), parts, [parts](Graph& g, const Tensor4& go) {
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (g.requires_grad(parts[i])) g.accumulate_grad(parts[i], ryolo::batch_slice(go, i));
      }
    });
  }

 private:
  using BackwardFn = std::function<void(Graph&, const Tensor4&)>;

  struct Node {
    Tensor4 owned;
    const Tensor4* ref = nullptr;
    std::optional<Tensor4> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Id push(Tensor4 value, const Tensor4* ref, bool requires_grad) {
    Node n;
    n.owned = std::move(value);
    n.ref = ref;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  Id push_op(Tensor4 value, std::initializer_list<Id> inputs, BackwardFn fn) {
    return push_op(std::move(value), std::vector<Id>(inputs), std::move(fn));
  }

  Id push_op(Tensor4 value, const std::vector<Id>& inputs, BackwardFn fn) {
    bool needs = false;
    for (Id i : inputs) needs = needs || nodes_[i].requires_grad;
    const Id id = push(std::move(value), nullptr, needs);
    if (needs) nodes_[id].backward = std::move(fn);
    return id;
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace ryolo
