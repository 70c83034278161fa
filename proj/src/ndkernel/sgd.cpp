#include "foresight/ndkernel/sgd.hpp"

#include <string>

#include "foresight/errors.hpp"

namespace foresight::nd {

SgdState::SgdState(double lr, double m) : learning_rate(lr), momentum(m) {
  if (!(lr > 0.0)) throw ConfigError("sgd: learning_rate must be > 0");
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("sgd: momentum must lie in [0, 1)");
}

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, SgdState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " params vs " + std::to_string(grads.size()) +
                     " gradients");
  }
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const Tensor* p : params) state.velocity.emplace_back(p->shape(), 0.0);
  }
  if (state.velocity.size() != params.size()) throw ShapeError("sgd_step: optimizer state tracks a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i] == nullptr) continue;
    if (grads[i]->shape() != params[i]->shape() || state.velocity[i].shape() != params[i]->shape()) {
      throw ShapeError("sgd_step: parameter " + std::to_string(i) + " shape " + to_string(params[i]->shape()) +
                       " vs gradient " + to_string(grads[i]->shape()));
    }
    if (!grads[i]->all_finite()) {
      throw NumericError("sgd_step: non-finite gradient for parameter " + std::to_string(i) + "; training aborted");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i] == nullptr) continue;
    Tensor& p = *params[i];
    Tensor& v = state.velocity[i];
    const Tensor& g = *grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = state.momentum * v[j] - state.learning_rate * g[j];
      p[j] += v[j];
    }
  }
}

}  // namespace foresight::nd
