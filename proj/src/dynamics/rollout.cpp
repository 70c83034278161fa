#include "foresight/dynamics/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"
#include "foresight/metrics/records.hpp"
#include "foresight/ndkernel/random.hpp"

namespace foresight {

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("euclidean: size mismatch");
  // scaled so that huge but finite states do not overflow
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) scale = std::max(scale, std::abs(a[i] - b[i]));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = (a[i] - b[i]) / scale;
    acc += r * r;
  }
  return scale * std::sqrt(acc);
}

namespace {

bool finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void check_scenario(const CompoundingScenario& s) {
  if (s.reference.empty()) throw UsageError("compounding: empty reference trajectory");
  if (!s.policy || !s.dynamics || !s.metric) throw UsageError("compounding: policy, dynamics and metric are required");
  if (!(s.lipschitz >= 0.0) || !std::isfinite(s.lipschitz)) throw UsageError("compounding: C must be finite and >= 0");
  const std::size_t d = s.reference.front().size();
  for (const auto& x : s.reference)
    if (x.size() != d) throw ShapeError("compounding: reference states differ in dimension");
  if (s.initial.size() != d) throw ShapeError("compounding: initial state dimension mismatch");
}

}  // namespace

CompoundingResult compounding_rollout(const CompoundingScenario& s) {
  check_scenario(s);
  CompoundingResult out;
  State x = s.initial;
  const double d1 = s.metric(x, s.reference[0]);
  double scale = 1.0;
  for (std::size_t k = 0; k < s.reference.size(); ++k) {
    if (!finite(x)) {
      out.truncated = true;
      log::warn("compounding: non-finite state at step " + std::to_string(k + 1) + ", rollout truncated");
      break;
    }
    out.trajectory.push_back(x);
    out.deviation.push_back(s.metric(x, s.reference[k]));
    out.bound.push_back(scale * d1);
    scale *= s.lipschitz;
    if (k + 1 < s.reference.size()) x = s.dynamics(x, s.policy(x));
  }
  return out;
}

LipschitzCheck check_lipschitz(const CompoundingScenario& s, std::size_t samples, double scale, std::uint64_t seed) {
  check_scenario(s);
  if (s.reference.size() < 2) throw UsageError("lipschitz: need at least two reference states");
  nd::Rng rng(seed);
  LipschitzCheck out;
  const std::size_t d = s.initial.size();
  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t k = static_cast<std::size_t>(nd::uniform_index(rng, s.reference.size() - 1));
    State x = s.reference[k];
    for (std::size_t i = 0; i < d; ++i) x[i] += scale * nd::uniform(rng, -1.0, 1.0);
    const double before = s.metric(x, s.reference[k]);
    if (before == 0.0) continue;
    const double after = s.metric(s.dynamics(x, s.policy(x)), s.reference[k + 1]);
    ++out.samples;
    const double ratio = after / before;
    out.max_ratio = std::max(out.max_ratio, ratio);
    if (after > s.lipschitz * before * (1.0 + 1e-12)) ++out.violations;
  }
  return out;
}

CompoundingScenario tightness_scenario(double kappa, std::size_t steps, double initial) {
  if (steps == 0) throw UsageError("tightness: steps must be positive");
  CompoundingScenario s;
  s.reference.assign(steps, State{0.0});
  s.initial = {initial};
  s.policy = [](std::span<const double>) { return 0.0; };
  s.dynamics = [kappa](std::span<const double> x, double) { return State{(1.0 + kappa) * x[0]}; };
  s.lipschitz = 1.0 + kappa;
  return s;
}

ClosedLoopResult closed_loop_eval(const Predictor& model, TaskId task, const ProspectiveModel& dynamics,
                                  const TaskSeries& series, std::size_t start, std::size_t window,
                                  std::size_t horizon) {
  if (window == 0 || horizon == 0) throw UsageError("closed loop: window and horizon must be positive");
  if (start + 1 < window || start + horizon >= series.size()) throw UsageError("closed loop: start out of range");
  const std::int64_t trial = series.trial[start];
  if (series.trial[start + 1 - window] != trial || series.trial[start + horizon] != trial) {
    throw UsageError("closed loop: window and horizon must stay in one trial");
  }
  const std::size_t d = series.dim();
  if (dynamics.state_dim() != d) throw ShapeError("closed loop: dynamics model dimension mismatch");

  ClosedLoopResult out;
  out.task = task;
  out.start = start;
  nd::Tensor win = window_at(series, start, window);
  for (std::size_t h = 1; h <= horizon; ++h) {
    const double y = predict_batch(model, task, win.reshaped({1, window, d}))[0];
    std::span<const double> last(win.raw() + (window - 1) * d, d);
    State next = dynamics.prospect(last, y);
    if (!std::isfinite(y) || !finite(next)) {
      out.truncated = true;
      log::warn("closed loop: non-finite state at step " + std::to_string(h) + ", loop truncated");
      break;
    }
    out.outputs.push_back(y);
    std::span<const double> truth(series.states.raw() + (start + h) * d, d);
    out.deviation.push_back(euclidean(next, truth));
    for (std::size_t r = 0; r + 1 < window; ++r)
      for (std::size_t c = 0; c < d; ++c) win.at(r, c) = win.at(r + 1, c);
    for (std::size_t c = 0; c < d; ++c) win.at(window - 1, c) = next[c];
    out.states.push_back(std::move(next));
  }
  return out;
}

std::vector<std::size_t> closed_loop_starts(const TaskSeries& series, std::size_t begin, std::size_t end,
                                            std::size_t window, std::size_t horizon) {
  std::vector<std::size_t> out;
  end = std::min(end, series.size());
  for (std::size_t k = std::max(begin, window - 1); k + horizon < end; ++k) {
    if (series.trial[k + 1 - window] == series.trial[k + horizon]) out.push_back(k);
  }
  return out;
}

std::vector<double> mean_deviation(std::span<const ClosedLoopResult> loops, std::size_t horizon) {
  std::vector<double> sum(horizon, 0.0);
  std::size_t used = 0;
  for (const auto& l : loops) {
    if (l.truncated || l.deviation.size() < horizon) continue;
    for (std::size_t h = 0; h < horizon; ++h) sum[h] += l.deviation[h];
    ++used;
  }
  if (used == 0) throw NumericError("closed loop: every loop was truncated");
  for (double& v : sum) v /= static_cast<double>(used);
  return sum;
}

std::string compounding_csv(const CompoundingResult& r) {
  std::ostringstream os;
  os << "step,deviation,bound\n";
  for (std::size_t k = 0; k < r.deviation.size(); ++k)
    os << k + 1 << ',' << metrics::format_double(r.deviation[k]) << ',' << metrics::format_double(r.bound[k]) << '\n';
  return os.str();
}

std::string closed_loop_csv(std::span<const ClosedLoopResult> loops) {
  std::ostringstream os;
  os << "task,start,step,output,deviation";
  const std::size_t d = loops.empty() || loops.front().states.empty() ? 0 : loops.front().states.front().size();
  for (std::size_t c = 0; c < d; ++c) os << ",x" << c;
  os << '\n';
  for (const auto& l : loops) {
    for (std::size_t h = 0; h < l.deviation.size(); ++h) {
      os << l.task.value << ',' << l.start << ',' << h + 1 << ',' << metrics::format_double(l.outputs[h]) << ','
         << metrics::format_double(l.deviation[h]);
      for (double v : l.states[h]) os << ',' << metrics::format_double(v);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace foresight
