#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "foresight/models/task_id.hpp"
#include "foresight/models/window.hpp"
#include "foresight/ndkernel/tensor.hpp"

namespace foresight {

/// Parameters of one synthetic locomotion task.
struct TaskSpec {
  TaskId id;
  double speed = 1.0;     // gait cycles per unit time
  double incline = 0.0;   // shapes the target profile
  double harmonic = 0.0;  // weight of a third-harmonic term in the profile
  std::size_t input_dim = 8;
  std::size_t samples = 6250;
  double noise = 0.05;  // sensor noise std
  double dt = 0.05;     // time per step; phase advances 2*pi*speed*dt per step
  double phase_jitter = 0.0;  // relative std of each phase increment (stride variability)
  std::size_t trials = 1;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;         // task structure (mixing matrix)
  std::uint64_t sample_seed = 0;  // realisation (initial phases, noise)

  void validate(std::size_t window = 1) const;
};

/// Latent quantities of a generated series, kept so shifts can be applied in latent space.
struct LatentState {
  std::vector<double> phase;  // theta_k
  nd::Tensor mixing;          // [d,d]
  nd::Tensor noise;           // [N,d]
};

/// Aligned sensor states X [N,d] and targets y [N] of one task with its split.
struct TaskSeries {
  TaskId task;
  nd::Tensor states;           // [N, d]
  std::vector<double> targets; // [N]
  std::vector<std::int64_t> trial;  // trial id per row
  std::size_t train_end = 0;   // rows [0, train_end) train, [train_end, N) validation
  std::optional<LatentState> latent;

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t dim() const { return states.dim(1); }
  /// Throws DataError when lengths disagree, values are non-finite or the split is invalid.
  void validate() const;
};

enum class Split { train, validation, all };

/// One window per step k whose T rows lie in a single trial (and inside `split`).
std::vector<Window> make_windows(const TaskSeries& series, std::size_t window, Split split = Split::all);
/// Windows restricted to rows [begin, end).
std::vector<Window> make_windows(const TaskSeries& series, std::size_t window, std::size_t begin, std::size_t end);
/// Rows [k-T+1, k] of the series as a [T,d] tensor.
nd::Tensor window_at(const TaskSeries& series, std::size_t k, std::size_t window);

}  // namespace foresight
