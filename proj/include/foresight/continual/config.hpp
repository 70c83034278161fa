#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace foresight {

enum class StrategyKind { none, er, prospective, noise_aug, ewc, si, gem, pnn };

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(const std::string& name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::none;
  /// lambda for ewc (default 100) or si (default 1).
  std::optional<double> strength;
  double si_xi = 0.1;
  std::size_t fisher_samples = 1000;
  std::size_t gem_memory = 256;
  /// noise_aug: injected std as a multiple of each feature's std in the buffer.
  double noise_level = 0.1;
  std::size_t capacity = 3000;
  /// Imagined steps at the end of each prospective window (1 = only the last step).
  std::size_t imagination_horizon = 1;

  double lambda() const;
  bool uses_buffer() const;
  void validate() const;
};

struct TrainConfig {
  std::size_t batch_size = 100;
  /// Rehearsal samples added to every minibatch, spread evenly over the old tasks.
  std::size_t rehearsal_batch = 100;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  /// Separate budget for the prospective models.
  std::size_t dynamics_epochs = 100;
  double dynamics_learning_rate = 1e-4;
  /// Train g_t for every task even when the strategy does not need it (closed-loop evaluation).
  bool always_train_dynamics = false;
  std::uint64_t seed = 0;

  void validate() const;
};

}  // namespace foresight
