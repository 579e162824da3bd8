// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/tape.hpp"

#include "srgdiff/error.hpp"

namespace srgdiff::nn {

const Tensor& Var::value() const { return tape_->value(*this); }

bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Param& p = store.get(name);
  nodes_.push_back(Node{p.value, {}, {}, {}, p.frozen ? nullptr : &p, !p.frozen});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (!p.valid() || &p.tape() != this) throw Error("operand recorded on a different tape");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_.at(p.id()).requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor* Tape::grad_sink(Var v) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return nullptr;
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.shape() == n.value.shape()) return n.grad;
  return Tensor(n.value.shape());
}

void Tape::backward(Var loss) {
  if (!loss.valid() || &loss.tape() != this) throw Error("loss is not recorded on this tape");
  const int root = loss.id();
  if (nodes_.at(root).value.size() != 1)
    throw ShapeError("backward requires a scalar loss, got " +
                     to_string(nodes_.at(root).value.shape()));

  std::vector<char> reachable(nodes_.size(), 0);
  reachable[root] = 1;
  for (int i = root; i >= 0; --i) {
    if (!reachable[i]) continue;
    for (int p : nodes_[i].parents) {
      if (p >= i) throw Error("tape cycle detected at node " + std::to_string(i));
      reachable[p] = 1;
    }
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[root].requires_grad) {
    last_visited_ = 0;
    return;
  }
  nodes_[root].grad = Tensor(nodes_[root].value.shape(), 1.0);

  last_visited_ = 0;
  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!reachable[i] || !n.requires_grad || n.grad.empty()) continue;
    ++last_visited_;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace srgdiff::nn
