#include "foresight/models/layers.hpp"

#include <cstring>

#include "foresight/errors.hpp"
#include "foresight/ndkernel/ops.hpp"

namespace foresight {

namespace ops = nd::ops;

ParamSnapshot snapshot(const ParamRefs& params) {
  ParamSnapshot snap;
  for (const auto& p : params) snap.emplace(p.name, *p.tensor);
  return snap;
}

void restore(const ParamRefs& params, const ParamSnapshot& snap) {
  for (const auto& p : params) {
    auto it = snap.find(p.name);
    if (it == snap.end()) throw UsageError("restore: snapshot lacks parameter " + p.name);
    if (it->second.shape() != p.tensor->shape()) throw ShapeError("restore: shape changed for " + p.name);
    *p.tensor = it->second;
  }
}

std::size_t count_parameters(const ParamRefs& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

nd::Var Binding::operator()(const nd::Tensor& param) {
  if (!track_) return frozen(param);
  auto it = bound_.find(&param);
  if (it != bound_.end() && it->second.valid()) return it->second;
  nd::Var v = tape_->variable(param);
  bound_.insert_or_assign(&param, v);
  return v;
}

nd::Var Binding::frozen(const nd::Tensor& param) { return tape_->constant(param); }

const nd::Tensor* Binding::gradient(const nd::Gradients& grads, const nd::Tensor& param) const {
  auto it = bound_.find(&param);
  if (it == bound_.end() || !grads.contains(it->second)) return nullptr;
  return &grads.of(it->second);
}

Dense::Dense(std::size_t in, std::size_t out, nd::Rng& rng) : weight(nd::Shape{in, out}), bias(nd::Shape{out}) {
  nd::kaiming_uniform(weight, in, rng);
}

nd::Var Dense::forward(Binding& bind, const nd::Var& x) const {
  return ops::add_bias(ops::matmul(x, bind(weight)), bind(bias));
}

void Dense::collect(ParamRefs& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

TemporalConv::TemporalConv(std::size_t k, std::size_t in, std::size_t out, std::size_t dil, nd::Rng& rng)
    : kernel(nd::Shape{k, in, out}), bias(nd::Shape{out}), dilation(dil) {
  if (dil < 1) throw ConfigError("temporal conv: dilation must be >= 1");
  nd::kaiming_uniform(kernel, k * in, rng);
}

nd::Var TemporalConv::forward(Binding& bind, const nd::Var& x) const {
  return ops::add_bias(ops::conv1d_causal(x, bind(kernel), dilation), bind(bias));
}

void TemporalConv::collect(ParamRefs& out, const std::string& prefix) {
  out.push_back({prefix + ".kernel", &kernel});
  out.push_back({prefix + ".bias", &bias});
}

}  // namespace foresight
