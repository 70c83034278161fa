#include "foresight/models/prospective_model.hpp"

#include <algorithm>

#include "foresight/errors.hpp"
#include "foresight/ndkernel/ops.hpp"

namespace foresight {

namespace ops = nd::ops;

ProspectiveModel::ProspectiveModel(ProspectiveConfig config) : config_(config) {
  if (config_.state_dim < 1 || config_.hidden < 1) throw ConfigError("prospective model: dimensions must be >= 1");
  nd::Rng rng(config_.seed);
  hidden = Dense(config_.state_dim + 1, config_.hidden, rng);
  output = Dense(config_.hidden, config_.state_dim, rng);
}

nd::Var ProspectiveModel::forward(Binding& bind, const nd::Var& inputs) const {
  const nd::Shape& s = inputs.shape();
  if (s.size() != 2 || s[1] != config_.state_dim + 1) {
    throw ShapeError("prospective model: expected inputs [B," + std::to_string(config_.state_dim + 1) + "], got " +
                     nd::to_string(s));
  }
  return output.forward(bind, ops::relu(hidden.forward(bind, inputs)));
}

nd::Tensor prospective_inputs(const nd::Tensor& states, std::span<const double> outputs) {
  if (states.rank() != 2 || states.dim(0) != outputs.size()) {
    throw ShapeError("prospective inputs: states " + nd::to_string(states.shape()) + " vs " +
                     std::to_string(outputs.size()) + " outputs");
  }
  const std::size_t B = states.dim(0), d = states.dim(1);
  nd::Tensor in(nd::Shape{B, d + 1});
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(states.raw() + b * d, d, in.raw() + b * (d + 1));
    in[b * (d + 1) + d] = outputs[b];
  }
  return in;
}

nd::Tensor ProspectiveModel::prospect_batch(const nd::Tensor& states, std::span<const double> outputs) const {
  if (states.rank() != 2 || states.dim(1) != config_.state_dim) {
    throw ShapeError("prospect: state dim mismatch, expected " + std::to_string(config_.state_dim) + ", got " +
                     nd::to_string(states.shape()));
  }
  nd::Tape tape;
  Binding bind(tape, false);
  return forward(bind, tape.constant(prospective_inputs(states, outputs))).value();
}

std::vector<double> ProspectiveModel::prospect(std::span<const double> state, double out) const {
  if (state.size() != config_.state_dim) {
    throw ShapeError("prospect: state has dim " + std::to_string(state.size()) + ", expected " +
                     std::to_string(config_.state_dim));
  }
  nd::Tensor x(nd::Shape{1, state.size()}, std::vector<double>(state.begin(), state.end()));
  const double y[1] = {out};
  nd::Tensor next = prospect_batch(x, y);
  return {next.data().begin(), next.data().end()};
}

ParamRefs ProspectiveModel::parameters() {
  ParamRefs out;
  hidden.collect(out, "prospective.hidden");
  output.collect(out, "prospective.output");
  return out;
}

}  // namespace foresight
