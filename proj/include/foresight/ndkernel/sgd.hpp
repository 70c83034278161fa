#pragma once

#include <span>
#include <vector>

#include "foresight/ndkernel/tensor.hpp"

namespace foresight::nd {

/// SGD with classical momentum: v <- momentum*v - lr*g; p <- p + v.
struct SgdState {
  SgdState() = default;
  SgdState(double learning_rate, double momentum);

  double learning_rate = 1e-4;
  double momentum = 0.9;
  /// One slot per parameter, allocated on the first step.
  std::vector<Tensor> velocity;
};

/// Applies one update. A null gradient skips that parameter (its velocity is left untouched).
/// Non-finite gradients abort with NumericError before anything is modified.
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, SgdState& state);

}  // namespace foresight::nd
