#pragma once

#include <span>
#include <string>
#include <vector>

#include "foresight/models/multitask_model.hpp"
#include "foresight/ndkernel/random.hpp"

namespace foresight {

enum class PerturbKind { fgsm, gaussian };

std::string to_string(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& name);

struct PerturbSpec {
  PerturbKind kind = PerturbKind::fgsm;
  /// tau for fgsm, noise ratio L for gaussian, both in units of the per-feature std.
  double magnitude = 0.0;
  void validate() const;
};

/// Per-feature standard deviation over every row of every window (population std).
std::vector<double> feature_std(std::span<const Window> windows);

/// x' = x + tau * sigma_f * sign(dJ/dx) with J the squared error against the window target.
/// The step is taken in units of `sigma` (one entry per feature); an empty `sigma` means raw units.
/// All T steps of each window are perturbed; coordinates with zero gradient are left alone.
std::vector<Window> fgsm_perturb(const Predictor& model, TaskId task, std::span<const Window> windows, double tau,
                                 std::span<const double> sigma = {});

/// Adds N(0, (L * sigma_f)^2) independently to every element.
std::vector<Window> noise_perturb(std::span<const Window> windows, double level, std::span<const double> sigma, nd::Rng& rng);

struct RobustnessPoint {
  double magnitude = 0.0;
  double mean_r2 = 0.0;
};

struct TaskWindows {
  TaskId task;
  std::vector<Window> windows;
};

/// Mean R^2 over tasks at each tau; sigma is computed per task from its clean windows.
std::vector<RobustnessPoint> fgsm_curve(const Predictor& model, std::span<const TaskWindows> tasks,
                                        std::span<const double> taus);
/// Same for Gaussian noise. Every level reuses the same standard-normal draws for a task, scaled by L.
std::vector<RobustnessPoint> noise_curve(const Predictor& model, std::span<const TaskWindows> tasks,
                                         std::span<const double> levels, std::uint64_t seed);

}  // namespace foresight
