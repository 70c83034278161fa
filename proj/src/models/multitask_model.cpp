#include "foresight/models/multitask_model.hpp"

#include <algorithm>

#include "foresight/errors.hpp"
#include "foresight/ndkernel/ops.hpp"

namespace foresight {

namespace ops = nd::ops;

std::vector<double> predict_batch(const Predictor& model, TaskId task, const nd::Tensor& windows) {
  nd::Tape tape;
  Binding bind(tape, false);
  nd::Var out = model.forward(bind, task, tape.constant(windows));
  const auto d = out.value().data();
  return {d.begin(), d.end()};
}

std::vector<double> predict_windows(const Predictor& model, TaskId task, std::span<const Window> windows,
                                    std::size_t chunk) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const auto part = windows.subspan(start, std::min(chunk, windows.size() - start));
    const auto pred = predict_batch(model, task, stack_windows(part));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

Head::Head(std::size_t in, std::size_t width, std::uint64_t seed) {
  nd::Rng rng(seed);
  hidden = Dense(in, width, rng);
  output = Dense(width, 1, rng);
}

nd::Var Head::forward(Binding& bind, const nd::Var& features) const {
  nd::Var h = ops::relu(hidden.forward(bind, features));
  nd::Var y = output.forward(bind, h);
  return ops::reshape(y, nd::Shape{y.shape()[0]});
}

void Head::collect(ParamRefs& out, const std::string& prefix) {
  hidden.collect(out, prefix + ".hidden");
  output.collect(out, prefix + ".output");
}

std::string to_string(HeadMode mode) { return mode == HeadMode::shared ? "shared" : "task_specific"; }

HeadMode parse_head_mode(const std::string& name) {
  if (name == "shared") return HeadMode::shared;
  if (name == "task_specific") return HeadMode::task_specific;
  throw ConfigError("unknown head mode '" + name + "' (expected shared or task_specific)");
}

MultiTaskModel::MultiTaskModel(ModelConfig config)
    : config_(std::move(config)), backbone_(config_.backbone, nd::derive_seed(config_.seed, 1)) {
  if (config_.head_hidden < 1) throw ConfigError("model: head_hidden must be >= 1");
  if (config_.head_mode == HeadMode::shared) {
    heads_.emplace(kSharedHead, Head(backbone_.output_width(), config_.head_hidden, nd::derive_seed(config_.seed, 3)));
  }
}

void MultiTaskModel::add_task_head(TaskId task) {
  if (config_.head_mode == HeadMode::shared) throw UsageError("add_task_head: model uses a single shared head");
  if (task == kSharedHead) throw UsageError("add_task_head: reserved task id");
  if (heads_.count(task)) throw UsageError("add_task_head: task " + task.str() + " already has a head");
  heads_.emplace(task, Head(backbone_.output_width(), config_.head_hidden, nd::derive_seed(config_.seed, 2, task.value)));
}

bool MultiTaskModel::has_task(TaskId task) const {
  return config_.head_mode == HeadMode::shared || heads_.count(task) != 0;
}

std::vector<TaskId> MultiTaskModel::tasks() const {
  std::vector<TaskId> out;
  for (const auto& [id, head] : heads_) {
    if (id != kSharedHead) out.push_back(id);
  }
  return out;
}

const Head& MultiTaskModel::resolve(TaskId task) const {
  if (config_.head_mode == HeadMode::shared) return heads_.begin()->second;
  auto it = heads_.find(task);
  if (it == heads_.end()) throw UsageError("model: no head for task " + task.str());
  return it->second;
}

const Head& MultiTaskModel::head(TaskId task) const { return resolve(task); }
Head& MultiTaskModel::head(TaskId task) { return const_cast<Head&>(resolve(task)); }

nd::Var MultiTaskModel::features(Binding& bind, const nd::Var& windows) const { return backbone_.forward(bind, windows); }

nd::Var MultiTaskModel::head_forward(Binding& bind, TaskId task, const nd::Var& feats) const {
  return resolve(task).forward(bind, feats);
}

nd::Var MultiTaskModel::forward(Binding& bind, TaskId task, const nd::Var& windows) const {
  const Head& h = resolve(task);
  return h.forward(bind, backbone_.forward(bind, windows));
}

double MultiTaskModel::predict(TaskId task, const Window& window) const {
  const nd::Tensor& x = window.inputs;
  return predict_batch(*this, task, x.reshaped(nd::Shape{1, x.dim(0), x.dim(1)})).front();
}

nd::Tensor MultiTaskModel::backbone_features(const nd::Tensor& windows) const {
  const bool single = windows.rank() == 2;
  nd::Tensor batch = single ? windows.reshaped(nd::Shape{1, windows.dim(0), windows.dim(1)}) : windows;
  nd::Tape tape;
  Binding bind(tape, false);
  nd::Tensor out = backbone_.forward(bind, tape.constant(std::move(batch))).value();
  if (single) return out.reshaped(nd::Shape{out.dim(1)});
  return out;
}

ParamRefs MultiTaskModel::parameters() {
  ParamRefs out = backbone_parameters();
  for (auto& [id, head] : heads_) head.collect(out, "head." + (id == kSharedHead ? std::string("shared") : id.str()));
  return out;
}

ParamRefs MultiTaskModel::backbone_parameters() {
  ParamRefs out;
  backbone_.collect(out);
  return out;
}

ParamRefs MultiTaskModel::head_parameters(TaskId task) {
  ParamRefs out;
  head(task).collect(out, "head." + (config_.head_mode == HeadMode::shared ? std::string("shared") : task.str()));
  return out;
}

}  // namespace foresight
