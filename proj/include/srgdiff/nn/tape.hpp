// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "srgdiff/nn/param_store.hpp"
#include "srgdiff/nn/tensor.hpp"

namespace srgdiff::nn {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Receives the output gradient and pushes contributions into parent grads.
using BackwardFn = std::function<void(Tape& tape, const Tensor& grad_out)>;

/// Linear record of operations in execution order. Parents always precede
/// their children, so reverse insertion order is a reverse topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Differentiable input not owned by a ParamStore.
  Var leaf(Tensor value);
  /// Parameter leaf; frozen parameters enter as constants.
  Var param(ParamStore& store, const std::string& name);

  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  /// Accumulates d(loss)/d(param) into the owning ParamStore grads.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  /// Gradient of the last backward() wrt v (zeros if v was unreachable).
  Tensor grad(Var v) const;
  /// Mutable gradient buffer for v, allocated on first use; nullptr when v
  /// does not require gradients.
  Tensor* grad_sink(Var v);

  std::size_t size() const { return nodes_.size(); }
  /// Number of nodes visited by the last backward().
  std::size_t last_visited() const { return last_visited_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    Param* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  std::size_t last_visited_ = 0;
};

}  // namespace srgdiff::nn
