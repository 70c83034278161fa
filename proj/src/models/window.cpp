#include "foresight/models/window.hpp"

#include <algorithm>

#include "foresight/errors.hpp"

namespace foresight {
namespace {

template <class Get>
nd::Tensor stack(std::size_t n, Get get) {
  if (n == 0) throw ShapeError("stack_windows: empty batch");
  const nd::Tensor& first = get(0).inputs;
  if (first.rank() != 2) throw ShapeError("stack_windows: window inputs must be [T,d], got " + nd::to_string(first.shape()));
  const std::size_t per = first.size();
  nd::Tensor out(nd::Shape{n, first.dim(0), first.dim(1)});
  for (std::size_t i = 0; i < n; ++i) {
    const nd::Tensor& w = get(i).inputs;
    if (w.shape() != first.shape()) {
      throw ShapeError("stack_windows: mixed window shapes " + nd::to_string(first.shape()) + " and " +
                       nd::to_string(w.shape()));
    }
    std::copy_n(w.raw(), per, out.raw() + i * per);
  }
  return out;
}

}  // namespace

nd::Tensor stack_windows(std::span<const Window> windows) {
  return stack(windows.size(), [&](std::size_t i) -> const Window& { return windows[i]; });
}

nd::Tensor stack_windows(std::span<const Window* const> windows) {
  return stack(windows.size(), [&](std::size_t i) -> const Window& { return *windows[i]; });
}

std::vector<double> targets_of(std::span<const Window> windows) {
  std::vector<double> y;
  y.reserve(windows.size());
  for (const auto& w : windows) y.push_back(w.target);
  return y;
}

}  // namespace foresight
