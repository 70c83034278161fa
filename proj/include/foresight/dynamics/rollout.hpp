#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "foresight/data/task_series.hpp"
#include "foresight/models/multitask_model.hpp"
#include "foresight/models/prospective_model.hpp"

namespace foresight {

using State = std::vector<double>;
using StatePolicy = std::function<double(std::span<const double>)>;
using StateDynamics = std::function<State(std::span<const double>, double)>;
using StateMetric = std::function<double(std::span<const double>, std::span<const double>)>;

double euclidean(std::span<const double> a, std::span<const double> b);

/// Closed-loop map x'_{k+1} = g(x'_k, f(x'_k)) compared against a reference trajectory x_1..x_N.
struct CompoundingScenario {
  std::vector<State> reference;
  State initial;  // x'_1
  StatePolicy policy;
  StateDynamics dynamics;
  StateMetric metric = euclidean;
  double lipschitz = 1.0;  // C
};

struct CompoundingResult {
  std::vector<double> deviation;  // d(x'_k, x_k), k = 1..steps
  std::vector<double> bound;      // C^{k-1} d(x'_1, x_1)
  std::vector<State> trajectory;
  bool truncated = false;  // rollout stopped at a non-finite state
};

CompoundingResult compounding_rollout(const CompoundingScenario& scenario);

struct LipschitzCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // max d(g(x,f(x)), x_{k+1}) / d(x, x_k)
};

/// Samples states around the reference (x_k plus uniform noise of the given scale) and checks
/// d(g(x, f(x)), x_{k+1}) <= C d(x, x_k).
LipschitzCheck check_lipschitz(const CompoundingScenario& scenario, std::size_t samples, double scale,
                               std::uint64_t seed);

/// x_k = 0, f = 0, g(x, y) = (1 + kappa) x, C = 1 + kappa: the bound holds with equality.
CompoundingScenario tightness_scenario(double kappa, std::size_t steps, double initial = 1.0);

/// Closed loop with the learned pair: start from the window ending at `start`, predict y_hat with f,
/// imagine the next state with g and slide the window, for `horizon` steps.
struct ClosedLoopResult {
  TaskId task;
  std::size_t start = 0;
  std::vector<double> outputs;    // y_hat along the loop
  std::vector<double> deviation;  // ||x_hat_{start+h} - x_{start+h}||, h = 1..
  std::vector<State> states;      // x_hat_{start+h}
  bool truncated = false;
};

ClosedLoopResult closed_loop_eval(const Predictor& model, TaskId task, const ProspectiveModel& dynamics,
                                  const TaskSeries& series, std::size_t start, std::size_t window,
                                  std::size_t horizon);

/// Starts k (window end) inside [begin, end) whose window and horizon stay in one trial.
std::vector<std::size_t> closed_loop_starts(const TaskSeries& series, std::size_t begin, std::size_t end,
                                            std::size_t window, std::size_t horizon);

/// Mean deviation at each horizon step over several loops (truncated loops are skipped).
std::vector<double> mean_deviation(std::span<const ClosedLoopResult> loops, std::size_t horizon);

std::string compounding_csv(const CompoundingResult& result);
std::string closed_loop_csv(std::span<const ClosedLoopResult> loops);

}  // namespace foresight
