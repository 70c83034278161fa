#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "foresight/ndkernel/tape.hpp"

namespace foresight {

struct ParamRef {
  std::string name;
  nd::Tensor* tensor = nullptr;
};
using ParamRefs = std::vector<ParamRef>;

/// Copies of parameter values keyed by name.
using ParamSnapshot = std::unordered_map<std::string, nd::Tensor>;

ParamSnapshot snapshot(const ParamRefs& params);
void restore(const ParamRefs& params, const ParamSnapshot& snap);
std::size_t count_parameters(const ParamRefs& params);

/// Maps model parameters onto tape leaves for one forward pass.
/// In tracking mode parameters become gradient leaves; otherwise constants.
class Binding {
 public:
  explicit Binding(nd::Tape& tape, bool track = true) : tape_(&tape), track_(track) {}

  nd::Var operator()(const nd::Tensor& param);
  /// Always binds as a constant (frozen columns, fixed anchors).
  nd::Var frozen(const nd::Tensor& param);

  nd::Tape& tape() { return *tape_; }
  bool tracking() const noexcept { return track_; }
  /// Gradient for a parameter bound in this pass, or nullptr if it did not take part.
  const nd::Tensor* gradient(const nd::Gradients& grads, const nd::Tensor& param) const;

 private:
  nd::Tape* tape_;
  bool track_;
  std::unordered_map<const nd::Tensor*, nd::Var> bound_;
};

}  // namespace foresight
