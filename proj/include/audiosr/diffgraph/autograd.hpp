#pragma once

#include <algorithm>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "audiosr/diffgraph/ops.hpp"
#include "audiosr/diffgraph/tensor.hpp"

namespace audiosr::dg {

namespace detail {

/// Every tensor reachable from root through recorded history (requiring
/// grad), ordered so that inputs precede their consumers.
inline std::vector<Tensor> topo_order(const Tensor& root) {
  std::vector<Tensor> order;
  std::unordered_set<const Node*> seen;
  // iterative post-order DFS; deep models overflow recursion
  struct Frame {
    Tensor t;
    std::size_t next;
  };
  std::vector<Frame> stack{{root, 0}};
  seen.insert(root.id());
  while (!stack.empty()) {
    auto& f = stack.back();
    const auto& fn = f.t.grad_fn();
    if (fn && f.next < fn->inputs().size()) {
      const Tensor in = fn->inputs()[f.next++];
      if (in.defined() && in.requires_grad() && seen.insert(in.id()).second) {
        stack.push_back({in, 0});
      }
      continue;
    }
    order.push_back(std::move(f.t));
    stack.pop_back();
  }
  return order;
}

}  // namespace detail

struct LeafGrad {
  Tensor leaf;
  Tensor grad;
};

/// Reverse-mode sweep from `root` seeded with `seed`. Returns the gradient
/// reaching every leaf that requires grad. When `targets` is given, only
/// paths leading to those tensors are expanded.
inline std::unordered_map<const detail::Node*, LeafGrad> run_backward(const Tensor& root, const Tensor& seed,
                                                                    bool create_graph,
                                                                    const std::vector<Tensor>* targets) {
  using detail::Node;
  const auto order = detail::topo_order(root);

  // A node is relevant when some target is reachable from it.
  std::unordered_set<const Node*> relevant;
  if (targets) {
    for (const auto& t : *targets) relevant.insert(t.id());
    for (const auto& t : order) {
      if (const auto& fn = t.grad_fn()) {
        for (const auto& in : fn->inputs()) {
          if (in.defined() && relevant.count(in.id())) {
            relevant.insert(t.id());
            break;
          }
        }
      }
    }
  }
  auto is_relevant = [&](const Node* n) { return !targets || relevant.count(n) > 0; };

  std::unordered_map<const Node*, Tensor> grads;
  grads[root.id()] = seed;
  std::unordered_map<const Node*, LeafGrad> leaf_grads;

  GradModeGuard mode(create_graph);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = *it;
    auto g_it = grads.find(t.id());
    if (g_it == grads.end()) continue;
    Tensor g = g_it->second;
    grads.erase(g_it);
    const auto& fn = t.grad_fn();
    if (!fn) {
      leaf_grads[t.id()] = LeafGrad{t, g};
      continue;
    }
    if (create_graph && !fn->double_differentiable()) {
      throw InvalidArgument("op '" + fn->name() + "' has no double-backward");
    }
    const auto& ins = fn->inputs();
    std::vector<bool> needs(ins.size());
    for (std::size_t i = 0; i < ins.size(); ++i) {
      needs[i] = ins[i].defined() && ins[i].requires_grad() && is_relevant(ins[i].id());
    }
    if (std::none_of(needs.begin(), needs.end(), [](bool b) { return b; })) continue;
    auto in_grads = fn->backward(g, needs);
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!needs[i] || !in_grads[i].defined()) continue;
      auto [slot, fresh] = grads.try_emplace(ins[i].id(), in_grads[i]);
      if (!fresh) slot->second = add(slot->second, in_grads[i]);
    }
  }
  return leaf_grads;
}

/// Accumulates d(loss)/d(leaf) into the .grad of every reachable leaf that
/// requires grad. Leaves with a pre-zeroed grad that the loss does not
/// reach keep their zero gradient.
inline void backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1,
          "backward: loss must be a scalar, got shape " + (loss.defined() ? to_string(loss.shape()) : "()"));
  require(loss.requires_grad(), "backward: loss is not part of a recorded computation");
  const auto leaves = run_backward(loss, Tensor::full(loss.shape(), 1.0), false, nullptr);
  for (const auto& [id, lg] : leaves) {
    Tensor leaf = lg.leaf;
    Tensor existing = leaf.grad();
    if (!existing.defined()) {
      leaf.set_grad(lg.grad.detach());
      continue;
    }
    auto dst = existing.mutable_data();
    const auto src = lg.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

/// Gradient of scalar `output` with respect to `x`, returned as a recorded
/// graph node so that a later backward() can differentiate through it.
/// Every op on a path from x to the output must be double-differentiable.
inline Tensor input_gradient(const Tensor& output, const Tensor& x) {
  require(output.defined() && output.numel() == 1, "input_gradient: output must be a scalar");
  require(x.defined() && x.requires_grad(), "input_gradient: x does not require grad");

  // reject up front, naming the first offending op on an x -> output path
  const auto order = detail::topo_order(output);
  std::unordered_set<const detail::Node*> reaches{x.id()};
  for (const auto& t : order) {
    if (!t.grad_fn()) continue;
    const auto& ins = t.grad_fn()->inputs();
    const bool r = std::any_of(ins.begin(), ins.end(),
                               [&](const Tensor& in) { return in.defined() && reaches.count(in.id()); });
    if (!r) continue;
    reaches.insert(t.id());
    if (!t.grad_fn()->double_differentiable()) {
      throw InvalidArgument("input_gradient: op '" + t.grad_fn()->name() + "' on the path has no double-backward");
    }
  }
  require(reaches.count(output.id()) > 0, "input_gradient: output does not depend on x");

  std::vector<Tensor> targets{x};
  auto grads = run_backward(output, Tensor::full(output.shape(), 1.0), true, &targets);
  auto it = grads.find(x.id());
  if (it == grads.end()) return Tensor::zeros(x.shape());
  return it->second.grad;
}

}  // namespace audiosr::dg
