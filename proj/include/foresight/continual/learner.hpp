#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "foresight/continual/buffer.hpp"
#include "foresight/continual/config.hpp"
#include "foresight/continual/pnn.hpp"
#include "foresight/continual/regularizers.hpp"
#include "foresight/data/task_series.hpp"
#include "foresight/metrics/forgetting.hpp"
#include "foresight/models/multitask_model.hpp"
#include "foresight/models/prospective_model.hpp"

namespace foresight {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;       // mean squared error of the primary samples seen in the epoch
  double validation_loss = 0.0;  // mean squared error on the monitored validation windows
};

struct FitSummary {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t patience_counter = 0;
  bool early_stopped = false;
  std::size_t steps = 0;
  /// Rehearsal samples drawn during training, by provenance.
  std::map<Provenance, std::size_t> rehearsal_usage;
};

struct DynamicsFit {
  std::size_t pairs = 0;
  std::size_t epochs = 0;
  double initial_loss = 0.0;     // mean squared error on the training pairs before training
  double train_loss = 0.0;       // same after training
  double validation_mse = 0.0;   // held-out pairs (training pairs when none are held out)
};

struct TaskTrainLog {
  TaskId task;
  FitSummary fit;
  std::optional<DynamicsFit> dynamics;
  std::size_t buffer_size = 0;
  std::map<Provenance, std::size_t> buffer_counts;
};

struct TrainLog {
  std::vector<TaskTrainLog> tasks;
  /// eps_i(j) as NRMSE on the test series, positions in training order.
  metrics::ErrorMatrix nrmse{"nrmse"};
  std::map<std::pair<std::size_t, std::size_t>, double> r2;
};

struct TaskScore {
  double r2 = 0.0;
  double nrmse = 0.0;
  double mse = 0.0;
};

TaskScore evaluate(const Predictor& model, TaskId task, std::span<const Window> windows);

/// Consecutive same-trial pairs (x_k, y_k) -> x_{k+1} with k, k+1 in rows [begin, end).
struct Transitions {
  nd::Tensor states;  // [n, d]
  std::vector<double> outputs;
  nd::Tensor next;    // [n, d]
  std::size_t size() const noexcept { return outputs.size(); }
};
Transitions transitions(const TaskSeries& series, std::size_t begin, std::size_t end);
double dynamics_mse(const ProspectiveModel& g, const Transitions& pairs);

/// Minimises sum ||x_{k+1} - g(x_k, y_k)||^2 over the training split with early stopping on the validation split.
DynamicsFit train_prospective(ProspectiveModel& g, const TaskSeries& series, const TrainConfig& config, std::uint64_t seed);
DynamicsFit train_prospective(ProspectiveModel& g, const Transitions& train, const Transitions& validation,
                              const TrainConfig& config, std::uint64_t seed);

/// Validation steps k whose rows k-horizon-T+1..k lie in the validation split of one trial.
std::vector<std::size_t> rehearsal_candidates(const TaskSeries& series, std::size_t window, std::size_t horizon = 1);

std::vector<BufferEntry> original_entries(const TaskSeries& series, std::span<const std::size_t> steps, std::size_t window);

/// For each step k: the original window ending at k and the imagined window whose last `horizon`
/// rows are rolled out as x_hat = g(x_prev, f(window ending at prev)). Targets stay y_k.
std::vector<BufferEntry> build_prospective_rehearsal(const Predictor& model, const ProspectiveModel& g,
                                                     const TaskSeries& series, std::span<const std::size_t> steps,
                                                     std::size_t window, std::size_t horizon = 1);

/// Copies of `entries` with N(0, (level * sigma_f)^2) added per feature f; sigma over all rows of the entries.
std::vector<BufferEntry> noise_augment(std::span<const BufferEntry> entries, double level, nd::Rng& rng);

/// Task-incremental learner: evolving heads (or PNN columns), the strategy's state, the rehearsal
/// buffer and the per-task prospective models.
class ContinualLearner {
 public:
  ContinualLearner(ModelConfig model, StrategyConfig strategy, TrainConfig train, ProspectiveConfig dynamics = {});

  /// Trains on one new task, then refreshes strategy state and the rehearsal data of all tasks so far.
  TaskTrainLog learn(const TaskSeries& series);

  const Predictor& predictor() const;
  MultiTaskModel& model() { return model_; }
  const MultiTaskModel& model() const { return model_; }
  /// Only for the pnn strategy.
  const PnnModel& pnn() const;
  const RehearsalBuffer& buffer() const noexcept { return buffer_; }
  const std::map<TaskId, ProspectiveModel>& dynamics() const noexcept { return dynamics_; }
  const std::vector<TaskId>& tasks() const noexcept { return order_; }
  const StrategyConfig& strategy() const noexcept { return strategy_; }
  const TrainConfig& train_config() const noexcept { return train_; }
  std::size_t window() const noexcept { return model_.config().backbone.window; }

 private:
  ParamRefs trainable(TaskId task);
  void refresh_buffer();

  MultiTaskModel model_;
  std::optional<PnnModel> pnn_;
  StrategyConfig strategy_;
  TrainConfig train_;
  ProspectiveConfig dynamics_config_;
  RehearsalBuffer buffer_;
  std::map<TaskId, ProspectiveModel> dynamics_;
  std::map<TaskId, TaskSeries> seen_;
  std::vector<TaskId> order_;
  std::optional<EwcPenalty> ewc_;
  std::optional<SiPenalty> si_;
  std::map<TaskId, std::vector<Window>> gem_memory_;
};

/// Learns `tasks` in order; after task i records eps_i(j) and R^2_i(j) on tests[j] for all j <= i.
TrainLog train_task_incremental(ContinualLearner& learner, std::span<const TaskSeries> tasks,
                                std::span<const TaskSeries> tests);

enum class JointMode { original, prospective };

std::string to_string(JointMode mode);
JointMode parse_joint_mode(const std::string& name);

struct JointResult {
  FitSummary pretrain;
  FitSummary finetune;
  std::map<TaskId, DynamicsFit> dynamics;
  std::size_t training_windows = 0;
  std::size_t augmentation = 0;
  /// Samples available to the fine-tuning stage; equal across modes for the same data.
  std::size_t budget() const noexcept { return training_windows + augmentation; }
};

/// All tasks at once: fit on the union of training splits, then fine-tune with the validation
/// windows added either as originals or as original/imagined pairs (same count in both modes).
JointResult train_joint(MultiTaskModel& model, std::span<const TaskSeries> tasks, JointMode mode,
                        const StrategyConfig& strategy, const TrainConfig& train, ProspectiveConfig dynamics = {});

}  // namespace foresight
