#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "foresight/models/task_id.hpp"
#include "foresight/ndkernel/tensor.hpp"

namespace foresight {

/// T consecutive sensor states x_{k-T+1..k} of one trial and the target y_k.
struct Window {
  nd::Tensor inputs;  // [T, d]
  double target = 0.0;
  TaskId task;
  std::size_t step = 0;  // k, index of the last row in the source series

  friend bool operator==(const Window&, const Window&) = default;
};

/// Packs windows into a [B, T, d] batch.
nd::Tensor stack_windows(std::span<const Window> windows);
nd::Tensor stack_windows(std::span<const Window* const> windows);
std::vector<double> targets_of(std::span<const Window> windows);

}  // namespace foresight
