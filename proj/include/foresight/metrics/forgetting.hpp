#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace foresight::metrics {

/// eps_i(j): error on task j after training through task i (1-based positions in the task order).
class ErrorMatrix {
 public:
  ErrorMatrix() = default;
  explicit ErrorMatrix(std::string kind) : kind_(std::move(kind)) {}

  void set(std::size_t trained_through, std::size_t task, double error);
  std::optional<double> get(std::size_t trained_through, std::size_t task) const;
  /// Throws UsageError naming the missing entry.
  double at(std::size_t trained_through, std::size_t task) const;
  std::size_t tasks() const noexcept { return tasks_; }
  const std::string& kind() const noexcept { return kind_; }
  const std::map<std::pair<std::size_t, std::size_t>, double>& entries() const noexcept { return entries_; }
  /// True when every entry with task <= trained_through <= tasks() exists.
  bool lower_triangle_complete() const;

 private:
  std::string kind_ = "nrmse";
  std::size_t tasks_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, double> entries_;
};

/// BWT(t) = 1/(t-1) sum_{j<t} (eps_j(j) - eps_t(j)). Higher is better.
double bwt(const ErrorMatrix& m, std::size_t t);

/// FR(t) = (eps_T(t) - eps_t(t)) / eps_t(t). Lower is better.
double forgetting_ratio(const ErrorMatrix& m, std::size_t t, std::size_t final_task);

}  // namespace foresight::metrics
