#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "foresight/models/parameters.hpp"

namespace foresight {

/// Gradients aligned with a ParamRefs list. An empty tensor means the parameter got no gradient.
using GradList = std::vector<nd::Tensor>;

/// lambda/2 * sum_tasks sum_i F_i (theta_i - theta*_i)^2 over parameters that existed when the task ended.
class EwcPenalty {
 public:
  explicit EwcPenalty(double lambda = 100.0);

  void add_task(ParamSnapshot anchor, ParamSnapshot fisher);
  std::size_t task_count() const noexcept { return terms_.size(); }
  double lambda() const noexcept { return lambda_; }

  double value(const ParamRefs& params) const;
  void add_gradient(const ParamRefs& params, GradList& grads) const;

 private:
  struct Term {
    ParamSnapshot anchor;
    ParamSnapshot fisher;
  };
  double lambda_;
  std::vector<Term> terms_;
};

/// Synaptic-intelligence penalty lambda * sum_i Omega_i (theta_i - theta*_i)^2.
class SiPenalty {
 public:
  SiPenalty(double lambda = 1.0, double xi = 0.1);

  /// Starts path-integral accumulation for a new task.
  void begin_task(const ParamRefs& params);
  /// omega_i += -g_i * (after_i - before_i) for one optimiser step; g is the data-loss gradient.
  void observe(const ParamRefs& params, const GradList& data_grads, const std::vector<nd::Tensor>& before);
  /// Omega_i += omega_i / (Delta_i^2 + xi); the anchor moves to the current parameters.
  void end_task(const ParamRefs& params);

  double value(const ParamRefs& params) const;
  void add_gradient(const ParamRefs& params, GradList& grads) const;

  const ParamSnapshot& importance() const noexcept { return importance_; }
  const ParamSnapshot& path_integral() const noexcept { return omega_; }

 private:
  double lambda_;
  double xi_;
  ParamSnapshot start_;
  ParamSnapshot omega_;
  ParamSnapshot importance_;
  ParamSnapshot anchor_;
};

struct GemProjection {
  std::vector<double> gradient;
  bool projected = false;
  std::size_t dropped = 0;     // all-zero memory gradients ignored
  std::size_t iterations = 0;  // dual projected-gradient iterations
};

/// Closest vector to g (Euclidean) with <result, m_j> >= 0 for every memory gradient m_j.
/// Solved in the dual by projected gradient, then made exact on the detected active set.
GemProjection gem_project(std::span<const double> g, const std::vector<std::vector<double>>& memory,
                          std::size_t max_iterations = 500, double tolerance = 1e-8);

std::vector<double> flatten(const ParamRefs& params, const GradList& grads);
void unflatten(std::span<const double> flat, const ParamRefs& params, GradList& grads);

}  // namespace foresight
