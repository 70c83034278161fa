#include "foresight/metrics/forgetting.hpp"

#include <cmath>

#include "foresight/errors.hpp"

namespace foresight::metrics {

void ErrorMatrix::set(std::size_t i, std::size_t j, double error) {
  if (i < 1 || j < 1) throw UsageError("error matrix: positions are 1-based");
  if (!std::isfinite(error) || error < 0.0) throw NumericError("error matrix: errors must be finite and non-negative");
  entries_[{i, j}] = error;
  tasks_ = std::max(tasks_, std::max(i, j));
}

std::optional<double> ErrorMatrix::get(std::size_t i, std::size_t j) const {
  auto it = entries_.find({i, j});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double ErrorMatrix::at(std::size_t i, std::size_t j) const {
  auto v = get(i, j);
  if (!v) throw UsageError("error matrix: missing eps_" + std::to_string(i) + "(" + std::to_string(j) + ")");
  return *v;
}

bool ErrorMatrix::lower_triangle_complete() const {
  for (std::size_t i = 1; i <= tasks_; ++i)
    for (std::size_t j = 1; j <= i; ++j)
      if (!get(i, j)) return false;
  return true;
}

double bwt(const ErrorMatrix& m, std::size_t t) {
  if (t < 2) throw UsageError("bwt: needs t >= 2");
  double acc = 0.0;
  for (std::size_t j = 1; j < t; ++j) acc += m.at(j, j) - m.at(t, j);
  return acc / static_cast<double>(t - 1);
}

double forgetting_ratio(const ErrorMatrix& m, std::size_t t, std::size_t final_task) {
  if (t < 1 || final_task < t) throw UsageError("forgetting_ratio: need 1 <= t <= T");
  const double base = m.at(t, t);
  if (!(base > 0.0)) throw NumericError("forgetting_ratio: eps_t(t) is zero");
  return (m.at(final_task, t) - base) / base;
}

}  // namespace foresight::metrics
