#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "audiosr/error.hpp"

namespace audiosr::dg {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

class Function;
class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::shared_ptr<Function> grad_fn;
  std::shared_ptr<Node> grad;  // accumulated by backward() on leaves
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Whether operations currently record graph history (per thread).
inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Scoped override of the recording mode.
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled) : previous_(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = enabled;
  }
  ~GradModeGuard() { detail::grad_mode_flag() = previous_; }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

struct NoGradGuard : GradModeGuard {
  NoGradGuard() : GradModeGuard(false) {}
};

/// Shared handle to a dense real array plus its autograd bookkeeping.
/// Copies alias the same storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    require(values.size() == dg::numel(shape), "tensor: " + std::to_string(values.size()) +
                                               " values do not fill shape " + dg::to_string(shape));
    node_->shape = std::move(shape);
    node_->data = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = dg::numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value) {
    const auto n = dg::numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool defined() const { return static_cast<bool>(node_); }
  explicit operator bool() const { return defined(); }

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }
  double item() const {
    require(numel() == 1, "item(): tensor of shape " + dg::to_string(shape()) + " is not a scalar");
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool r) {
    node_->requires_grad = r;
    return *this;
  }

  const std::shared_ptr<Function>& grad_fn() const { return node_->grad_fn; }
  bool is_leaf() const { return !node_->grad_fn; }

  /// Accumulated gradient on a leaf; undefined until backward() or zero_grad().
  Tensor grad() const {
    Tensor g;
    g.node_ = node_->grad;
    return g;
  }
  void set_grad(const Tensor& g) { node_->grad = g.node_; }
  void zero_grad() { node_->grad = Tensor::zeros(shape()).node_; }

  /// Same values, no history.
  Tensor detach() const { return Tensor(shape(), node_->data); }
  Tensor clone() const { return detach(); }

  const detail::Node* id() const { return node_.get(); }

 private:
  friend class Function;
  friend Tensor make_result(Shape, std::vector<double>, std::shared_ptr<Function>, std::vector<Tensor>);

  std::shared_ptr<detail::Node> node_;
};

/// A recorded operation. backward() maps the gradient of the output to one
/// gradient per input (undefined when that input needs none). Backward
/// bodies are written with differentiable ops, so running them with
/// recording enabled yields a graph for higher-order derivatives.
class Function {
 public:
  virtual ~Function() = default;
  virtual std::string name() const = 0;
  /// False for ops whose backward computes raw values that are not
  /// themselves recorded.
  virtual bool double_differentiable() const { return true; }
  virtual std::vector<Tensor> backward(const Tensor& grad_out, const std::vector<bool>& needs_grad) = 0;

  const std::vector<Tensor>& inputs() const { return inputs_; }

 private:
  friend Tensor make_result(Shape, std::vector<double>, std::shared_ptr<Function>, std::vector<Tensor>);
  std::vector<Tensor> inputs_;
};

/// Wraps freshly computed values; attaches `fn` as history when recording is
/// on and some input requires grad.
inline Tensor make_result(Shape shape, std::vector<double> values, std::shared_ptr<Function> fn,
                          std::vector<Tensor> inputs) {
  Tensor out(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  fn->inputs_ = std::move(inputs);
  out.node_->requires_grad = true;
  out.node_->grad_fn = std::move(fn);
  return out;
}

}  // namespace audiosr::dg
