#pragma once

#include <vector>

#include "foresight/models/multitask_model.hpp"

namespace foresight {

/// Progressive network: one backbone+head column per task. Column t reads the backbone
/// features of columns 1..t-1 through linear lateral adapters into its head's hidden layer.
/// Only the newest column is trainable; earlier columns are bound as constants.
class PnnModel : public Predictor {
 public:
  PnnModel() = default;
  explicit PnnModel(ModelConfig config);

  void add_column(TaskId task);
  bool has_task(TaskId task) const override;
  std::size_t column_count() const noexcept { return columns_.size(); }
  std::vector<TaskId> tasks() const;

  nd::Var forward(Binding& bind, TaskId task, const nd::Var& windows) const override;

  /// Parameters of the column serving `task`.
  ParamRefs column_parameters(TaskId task);
  ParamRefs parameters();
  const ModelConfig& config() const noexcept { return config_; }

 private:
  struct Column {
    TaskId task;
    Backbone backbone;
    Head head;
    std::vector<Dense> laterals;  // one per earlier column
  };
  std::size_t index_of(TaskId task) const;

  ModelConfig config_;
  std::vector<Column> columns_;
};

}  // namespace foresight
