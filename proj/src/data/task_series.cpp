#include "foresight/data/task_series.hpp"

#include <algorithm>
#include <cmath>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"

namespace foresight {

void TaskSeries::validate() const {
  if (states.rank() != 2) throw DataError("series: states must be [N,d]");
  const std::size_t n = states.dim(0);
  if (targets.size() != n || trial.size() != n) {
    throw DataError("series: " + std::to_string(n) + " states, " + std::to_string(targets.size()) + " targets, " +
                    std::to_string(trial.size()) + " trial ids");
  }
  if (!states.all_finite()) throw DataError("series: non-finite sensor state");
  for (double y : targets) {
    if (!std::isfinite(y)) throw DataError("series: non-finite target");
  }
  if (train_end > n) throw DataError("series: train_end beyond series length");
}

nd::Tensor window_at(const TaskSeries& series, std::size_t k, std::size_t window) {
  const std::size_t d = series.dim();
  if (window == 0 || k + 1 < window || k >= series.size()) {
    throw ShapeError("window_at: step " + std::to_string(k) + " cannot end a window of " + std::to_string(window));
  }
  nd::Tensor w(nd::Shape{window, d});
  std::copy_n(series.states.raw() + (k + 1 - window) * d, window * d, w.raw());
  return w;
}

std::vector<Window> make_windows(const TaskSeries& series, std::size_t window, std::size_t begin, std::size_t end) {
  if (window < 1) throw ConfigError("make_windows: window length must be >= 1");
  end = std::min(end, series.size());
  std::vector<Window> out;
  std::size_t run = 0;  // consecutive same-trial rows ending at k
  for (std::size_t k = begin; k < end; ++k) {
    run = (k > begin && series.trial[k] == series.trial[k - 1]) ? run + 1 : 1;
    if (run >= window) {
      out.push_back(Window{window_at(series, k, window), series.targets[k], series.task, k});
    }
  }
  if (out.empty() && end > begin) {
    log::warn("make_windows: window length " + std::to_string(window) + " exceeds every trial in rows [" +
              std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  return out;
}

std::vector<Window> make_windows(const TaskSeries& series, std::size_t window, Split split) {
  switch (split) {
    case Split::train: return make_windows(series, window, 0, series.train_end);
    case Split::validation: return make_windows(series, window, series.train_end, series.size());
    case Split::all: break;
  }
  return make_windows(series, window, 0, series.size());
}

}  // namespace foresight
