#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "urbanvlp/numerics/tensor.hpp"

namespace urbanvlp {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
};

/// Access handed to a node's backward function: input/output values, the
/// upstream gradient, and writable gradient buffers for inputs that take one
/// (null for constants).
class BackwardContext {
 public:
  BackwardContext(const Tensor& out, const Tensor& out_grad, std::vector<const Tensor*> inputs,
                  std::vector<Tensor*> input_grads)
      : out_(out), out_grad_(out_grad), inputs_(std::move(inputs)),
        input_grads_(std::move(input_grads)) {}

  const Tensor& output() const { return out_; }
  const Tensor& grad() const { return out_grad_; }
  const Tensor& input(std::size_t i) const { return *inputs_[i]; }
  Tensor* input_grad(std::size_t i) const { return input_grads_[i]; }

 private:
  const Tensor& out_;
  const Tensor& out_grad_;
  std::vector<const Tensor*> inputs_;
  std::vector<Tensor*> input_grads_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Reverse-mode recording. Nodes are appended in evaluation order, so the
/// node list itself is a topological order; backward walks it once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When disabled, nodes keep forward values only and every leaf is a constant.
  void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

  /// Leaf that accumulates gradient (unless recording is disabled).
  Var variable(Tensor value) { return push(std::move(value), {}, nullptr, grad_enabled_); }

  /// Binds a parameter tensor by address; repeated binds return the same leaf
  /// so that every use accumulates into one gradient.
  Var parameter(const Tensor& param) { return bind(param, grad_enabled_); }

  /// Binds a parameter that never receives gradient.
  Var frozen(const Tensor& param) { return bind(param, false); }

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) {
      if (v.tape != this) throw UsageError("operands recorded on different tapes");
      ids.push_back(v.id);
      needs = needs || nodes_[v.id].requires_grad;
    }
    if (!needs || !grad_enabled_) return push(std::move(value), {}, nullptr, false);
    return push(std::move(value), std::move(ids), std::move(fn), true);
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

  /// Populates gradients of every requires_grad node with dLoss/dNode.
  void backward(Var loss) {
    if (loss.tape != this) throw UsageError("loss recorded on a different tape");
    if (backward_done_) throw UsageError("backward already ran on this tape; reset() first");
    const Tensor& lv = nodes_.at(loss.id).value;
    if (lv.size() != 1) {
      throw DimensionError("backward requires a scalar loss, got " + shape_string(lv.shape()));
    }
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grads_.assign(nodes_.size(), Tensor{});
    has_grad_.assign(nodes_.size(), false);
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.backward || !has_grad_[i]) continue;
      std::vector<const Tensor*> ins;
      std::vector<Tensor*> in_grads;
      ins.reserve(node.inputs.size());
      in_grads.reserve(node.inputs.size());
      for (auto in : node.inputs) {
        ins.push_back(&nodes_[in].value);
        in_grads.push_back(nodes_[in].requires_grad ? &grad_buffer(in) : nullptr);
      }
      node.backward(BackwardContext(node.value, grads_[i], std::move(ins), std::move(in_grads)));
    }
  }

  /// Gradient of a node; zeros when nothing flowed into it.
  Tensor grad(Var v) const {
    if (!backward_done_) throw UsageError("gradient requested before backward");
    if (v.id < has_grad_.size() && has_grad_[v.id]) return grads_[v.id];
    return Tensor::zeros(nodes_.at(v.id).value.shape());
  }

  /// Gradient of a bound parameter; zeros if it was never bound or reached.
  Tensor grad(const Tensor& param) const {
    auto it = bound_.find(&param);
    if (it == bound_.end()) return Tensor::zeros(param.shape());
    return grad(Var{const_cast<Tape*>(this), it->second});
  }

  bool is_bound(const Tensor& param) const { return bound_.count(&param) != 0; }

  void reset() {
    nodes_.clear();
    grads_.clear();
    has_grad_.clear();
    bound_.clear();
    backward_done_ = false;
  }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, bool requires_grad) {
    if (backward_done_) throw UsageError("cannot record on a tape after backward; reset() first");
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(fn), requires_grad});
    return Var{this, nodes_.size() - 1};
  }

  Var bind(const Tensor& param, bool requires_grad) {
    auto it = bound_.find(&param);
    if (it != bound_.end()) return Var{this, it->second};
    Var v = push(param, {}, nullptr, requires_grad);
    bound_.emplace(&param, v.id);
    return v;
  }

  Tensor& grad_buffer(std::size_t id) {
    if (!has_grad_[id]) {
      grads_[id] = Tensor::zeros(nodes_[id].value.shape());
      has_grad_[id] = true;
    }
    return grads_[id];
  }

  // deque: references returned by value() survive later appends.
  std::deque<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  std::unordered_map<const Tensor*, std::size_t> bound_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline bool Var::requires_grad() const { return tape->requires_grad(id); }

}  // namespace urbanvlp
