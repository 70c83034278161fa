#include "foresight/continual/pnn.hpp"

#include "foresight/errors.hpp"
#include "foresight/ndkernel/ops.hpp"

namespace foresight {

namespace ops = nd::ops;

PnnModel::PnnModel(ModelConfig config) : config_(std::move(config)) { config_.backbone.validate(); }

void PnnModel::add_column(TaskId task) {
  if (has_task(task)) throw UsageError("pnn: task " + task.str() + " already has a column");
  Column c{task, Backbone(config_.backbone, nd::derive_seed(config_.seed, 10, task.value)), {}, {}};
  c.head = Head(c.backbone.output_width(), config_.head_hidden, nd::derive_seed(config_.seed, 11, task.value));
  nd::Rng rng(nd::derive_seed(config_.seed, 12, task.value));
  for (const auto& prior : columns_) c.laterals.emplace_back(prior.backbone.output_width(), config_.head_hidden, rng);
  columns_.push_back(std::move(c));
}

std::size_t PnnModel::index_of(TaskId task) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].task == task) return i;
  throw UsageError("pnn: no column for task " + task.str());
}

bool PnnModel::has_task(TaskId task) const {
  for (const auto& c : columns_)
    if (c.task == task) return true;
  return false;
}

std::vector<TaskId> PnnModel::tasks() const {
  std::vector<TaskId> out;
  for (const auto& c : columns_) out.push_back(c.task);
  return out;
}

nd::Var PnnModel::forward(Binding& bind, TaskId task, const nd::Var& windows) const {
  const std::size_t target = index_of(task);
  Binding frozen(bind.tape(), false);
  auto binding_for = [&](std::size_t i) -> Binding& { return i + 1 == columns_.size() ? bind : frozen; };

  std::vector<nd::Var> features;
  for (std::size_t i = 0; i <= target; ++i) features.push_back(columns_[i].backbone.forward(binding_for(i), windows));

  const Column& col = columns_[target];
  Binding& b = binding_for(target);
  nd::Var pre = col.head.hidden.forward(b, features[target]);
  for (std::size_t j = 0; j < target; ++j) pre = ops::add(pre, col.laterals[j].forward(b, features[j]));
  nd::Var y = col.head.output.forward(b, ops::relu(pre));
  return ops::reshape(y, nd::Shape{y.shape()[0]});
}

ParamRefs PnnModel::column_parameters(TaskId task) {
  Column& c = columns_[index_of(task)];
  ParamRefs out;
  const std::string prefix = "column." + task.str();
  c.backbone.collect(out, prefix + ".backbone");
  c.head.collect(out, prefix + ".head");
  for (std::size_t j = 0; j < c.laterals.size(); ++j) c.laterals[j].collect(out, prefix + ".lateral." + std::to_string(j));
  return out;
}

ParamRefs PnnModel::parameters() {
  ParamRefs out;
  for (const auto& c : columns_) {
    auto part = column_parameters(c.task);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace foresight
