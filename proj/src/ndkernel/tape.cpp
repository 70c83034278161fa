#include "foresight/ndkernel/tape.hpp"

#include "foresight/errors.hpp"

namespace foresight::nd {

Tape& Var::tape() const {
  if (tape_ == nullptr) throw UsageError("var: not attached to a tape");
  return *tape_;
}

const Tensor& Var::value() const {
  tape().check(*this);
  return tape_->value(id_);
}

bool Var::valid() const noexcept {
  return tape_ != nullptr && generation_ == tape_->generation() && id_ < tape_->size();
}

bool Gradients::contains(const Var& v) const {
  return v.generation_ == generation_ && grads_.count(v.id()) != 0;
}

const Tensor& Gradients::of(const Var& v) const {
  if (v.generation_ != generation_) throw UsageError("gradients: variable belongs to a different pass");
  auto it = grads_.find(v.id());
  if (it == grads_.end()) throw UsageError("gradients: node " + std::to_string(v.id()) + " is not a leaf variable");
  return it->second;
}

void Tape::check(const Var& v) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw UsageError("tape: stale or foreign variable (was the tape cleared by backward?)");
  }
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1), generation_);
}

Var Tape::variable(Tensor value) {
  require_finite(value, "variable");
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = true;
  n.leaf_variable = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  require_finite(value, op);
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check(in);
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape() || n.grad.empty() != n.value.empty()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

Gradients Tape::backward(const Var& output) {
  if (nodes_.empty()) throw UsageError("backward: nothing recorded (run forward first)");
  check(output);
  if (value(output.id()).size() != 1) {
    throw ShapeError("backward: implicit seed needs a scalar output, got " + to_string(value(output.id()).shape()));
  }
  return backward(output, Tensor(value(output.id()).shape(), 1.0));
}

Gradients Tape::backward(const Var& output, const Tensor& seed) {
  if (nodes_.empty()) throw UsageError("backward: nothing recorded (run forward first)");
  check(output);
  if (seed.shape() != value(output.id()).shape()) {
    throw ShapeError("backward: seed shape " + to_string(seed.shape()) + " != output shape " +
                     to_string(value(output.id()).shape()));
  }
  require_finite(seed, "backward seed");
  grad(output.id()) = seed;
  for (NodeId i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
  Gradients out;
  out.generation_ = generation_;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.leaf_variable) continue;
    if (n.grad.shape() != n.value.shape() || (n.grad.empty() && !n.value.empty())) {
      n.grad = Tensor(n.value.shape(), 0.0);
    }
    require_finite(n.grad, "backward");
    out.grads_.emplace(i, std::move(n.grad));
  }
  clear();
  return out;
}

void Tape::clear() {
  nodes_.clear();
  ++generation_;
}

Graph::Graph(std::vector<Shape> input_shapes, Builder builder)
    : input_shapes_(std::move(input_shapes)), builder_(std::move(builder)) {}

Var Graph::forward(Tape& tape, std::span<const Tensor> inputs, std::vector<Var>* leaves) const {
  if (inputs.size() != input_shapes_.size()) {
    throw ShapeError("graph: expected " + std::to_string(input_shapes_.size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != input_shapes_[i]) {
      throw ShapeError("graph: input " + std::to_string(i) + " has shape " + to_string(inputs[i].shape()) +
                       ", declared " + to_string(input_shapes_[i]));
    }
    vars.push_back(tape.variable(inputs[i]));
  }
  Var out = builder_(tape, vars);
  if (leaves) *leaves = std::move(vars);
  return out;
}

Tensor Graph::evaluate(std::span<const Tensor> inputs) const {
  Tape tape;
  return forward(tape, inputs).value();
}

}  // namespace foresight::nd
