#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "foresight/ndkernel/tensor.hpp"

namespace foresight::nd {

using NodeId = std::uint32_t;

class Tape;

/// Handle to a node recorded on a Tape. Invalidated when the tape is cleared.
class Var {
 public:
  Var() = default;

  NodeId id() const noexcept { return id_; }
  Tape& tape() const;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept;

 private:
  friend class Tape;
  friend class Gradients;
  Var(Tape* tape, NodeId id, std::uint64_t generation) : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Gradients of one backward pass, keyed by the leaf variables of that pass.
class Gradients {
 public:
  bool contains(const Var& v) const;
  /// Gradient for a leaf variable; zero-filled when the output did not depend on it.
  const Tensor& of(const Var& v) const;

 private:
  friend class Tape;
  std::uint64_t generation_ = 0;
  std::unordered_map<NodeId, Tensor> grads_;
};

/// Define-by-run reverse-mode tape. Rebuilt for every batch.
class Tape {
 public:
  /// Propagates the gradient of node `self` (available as grad(self)) into its inputs.
  using BackwardFn = std::function<void(Tape&, NodeId self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is reported by backward().
  Var variable(Tensor value);
  /// Leaf treated as a constant.
  Var constant(Tensor value);

  /// Records the result of a primitive op. Used by the op implementations.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  NodeId input(NodeId self, std::size_t i) const { return nodes_[self].inputs[i]; }
  std::size_t input_count(NodeId self) const { return nodes_[self].inputs.size(); }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator of a node, zero-allocated on first access.
  Tensor& grad(NodeId id);

  /// Reverse sweep from `output` seeded with `seed`; clears the tape afterwards.
  Gradients backward(const Var& output, const Tensor& seed);
  /// Reverse sweep from a scalar output with seed 1.
  Gradients backward(const Var& output);

  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t generation() const noexcept { return generation_; }

  void check(const Var& v) const;

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    Tensor grad;
    bool requires_grad = false;
    bool leaf_variable = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

/// A composed graph with declared input shapes; forward() validates inputs against them.
class Graph {
 public:
  using Builder = std::function<Var(Tape&, std::span<const Var>)>;

  Graph(std::vector<Shape> input_shapes, Builder builder);

  /// Records the graph on `tape` with the inputs as gradient-tracked leaves.
  Var forward(Tape& tape, std::span<const Tensor> inputs, std::vector<Var>* leaves = nullptr) const;
  Tensor evaluate(std::span<const Tensor> inputs) const;
  const std::vector<Shape>& input_shapes() const noexcept { return input_shapes_; }

 private:
  std::vector<Shape> input_shapes_;
  Builder builder_;
};

}  // namespace foresight::nd
