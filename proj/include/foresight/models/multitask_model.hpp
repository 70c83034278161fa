#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "foresight/models/backbone.hpp"
#include "foresight/models/task_id.hpp"
#include "foresight/models/window.hpp"

namespace foresight {

/// Anything that maps a batch of windows for a task to predictions.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// windows [B,T,d] -> predictions [B]
  virtual nd::Var forward(Binding& bind, TaskId task, const nd::Var& windows) const = 0;
  virtual bool has_task(TaskId task) const = 0;
};

std::vector<double> predict_batch(const Predictor& model, TaskId task, const nd::Tensor& windows);
std::vector<double> predict_windows(const Predictor& model, TaskId task, std::span<const Window> windows,
                                    std::size_t chunk = 512);

/// Task-specific output layer f_t: two-layer feed-forward network, features -> scalar.
struct Head {
  Head() = default;
  Head(std::size_t in, std::size_t hidden, std::uint64_t seed);

  nd::Var forward(Binding& bind, const nd::Var& features) const;
  void collect(ParamRefs& out, const std::string& prefix);

  Dense hidden;
  Dense output;
};

enum class HeadMode { shared, task_specific };

std::string to_string(HeadMode mode);
HeadMode parse_head_mode(const std::string& name);

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t head_hidden = 32;
  HeadMode head_mode = HeadMode::task_specific;
  std::uint64_t seed = 0;
};

/// f = f_t o f^s with a growing set of task heads (or one shared head).
class MultiTaskModel : public Predictor {
 public:
  MultiTaskModel() = default;
  explicit MultiTaskModel(ModelConfig config);

  /// Fresh, seeded head for `task`. Rejected in shared mode and for known tasks.
  void add_task_head(TaskId task);
  bool has_task(TaskId task) const override;
  std::vector<TaskId> tasks() const;
  std::size_t head_count() const noexcept { return heads_.size(); }

  nd::Var forward(Binding& bind, TaskId task, const nd::Var& windows) const override;
  nd::Var features(Binding& bind, const nd::Var& windows) const;
  nd::Var head_forward(Binding& bind, TaskId task, const nd::Var& features) const;

  double predict(TaskId task, const Window& window) const;
  /// Backbone representation f^s of one window [T,d] (-> [F]) or a batch [B,T,d] (-> [B,F]).
  nd::Tensor backbone_features(const nd::Tensor& windows) const;

  const Head& head(TaskId task) const;
  Head& head(TaskId task);
  Backbone& backbone() noexcept { return backbone_; }
  const Backbone& backbone() const noexcept { return backbone_; }
  const ModelConfig& config() const noexcept { return config_; }

  ParamRefs parameters();
  ParamRefs backbone_parameters();
  ParamRefs head_parameters(TaskId task);

  /// Key of the single head in shared mode.
  static constexpr TaskId kSharedHead{0xFFFFFFFFu};

 private:
  const Head& resolve(TaskId task) const;

  ModelConfig config_;
  Backbone backbone_;
  std::map<TaskId, Head> heads_;
};

}  // namespace foresight
