#pragma once

#include <cstddef>
#include <span>

namespace foresight::metrics {

struct WilcoxonResult {
  double statistic = 0.0;  // W = min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;       // non-zero differences used
  double p_greater = 1.0;  // one-sided, alternative: differences tend to be positive
  double p_less = 1.0;     // one-sided, alternative: differences tend to be negative
  double p_two_sided = 1.0;
  bool exact = false;
};

/// Wilcoxon signed-rank test on paired differences. Zeros are dropped, tied |d| get average
/// ranks. Exact enumeration for n <= 12, otherwise a normal approximation with continuity and
/// tie corrections. No multiple-comparison correction is applied.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences);

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace foresight::metrics
