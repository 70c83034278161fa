#pragma once

#include <string>
#include <vector>

#include "foresight/data/task_series.hpp"

namespace foresight {

/// Gait-phase features [sin t, cos t, sin 2t, cos 2t, ...] truncated to `dim`.
std::vector<double> phase_features(double theta, std::size_t dim);
/// Target joint profile y(theta) = (1 + 0.3a) sin t + 0.2a sin 2t + h sin 3t.
double target_profile(double theta, double incline, double harmonic);

/// Seeded full-rank mixing matrix of a task (resampled while ill-conditioned).
nd::Tensor mixing_matrix(const TaskSpec& spec);

/// Synthetic series: phase advances 2*pi*speed*dt (1 + jitter) per step, X_k = M phi(theta_k) + eps.
/// Every trial starts at a random phase.
TaskSeries generate_task(const TaskSpec& spec);
/// Same task structure with an independent realisation, for held-out testing.
TaskSpec held_out_spec(const TaskSpec& spec);

enum class ShiftKind { phase_offset, amplitude_scale, additive_bias };

std::string to_string(ShiftKind kind);
ShiftKind parse_shift_kind(const std::string& name);

struct ShiftSpec {
  ShiftKind kind = ShiftKind::additive_bias;
  double magnitude = 0.0;
};

/// Controlled covariate shift.
///  phase_offset:    X = M phi(theta + m) + eps   (needs latent state)
///  amplitude_scale: X and y scaled by (1 + m)
///  additive_bias:   X + M (m * 1), or X + m when no latent mixing is known
TaskSeries apply_shift(const TaskSeries& series, const ShiftSpec& shift);

enum class SuiteKind { enabl3s_like, embry_like };

std::string to_string(SuiteKind kind);
SuiteKind parse_suite_kind(const std::string& name);

struct SuiteOptions {
  std::size_t input_dim = 8;
  std::size_t samples = 6250;
  double noise = 0.05;
  double dt = 0.05;
  std::size_t trials = 5;
  double phase_jitter = 0.05;
  std::uint64_t seed = 0;
};

/// enabl3s_like: five modes with distinct (speed, incline, waveform).
/// embry_like: 3 speeds x 3 inclines, speed in {0.8, 1.0, 1.2}, incline in {-1, 0, 1}.
std::vector<TaskSpec> make_suite(SuiteKind kind, const SuiteOptions& options);

}  // namespace foresight
