#pragma once

#include <span>

namespace foresight::metrics {

/// 1 - SS_res / SS_tot. Throws when y_true has zero variance.
double r_squared(std::span<const double> y_true, std::span<const double> y_pred);

/// RMSE normalised by the target range max(y) - min(y).
double nrmse(std::span<const double> y_true, std::span<const double> y_pred);

double mean_squared_error(std::span<const double> y_true, std::span<const double> y_pred);

/// Sample Pearson correlation.
double pearson(std::span<const double> x, std::span<const double> y);
/// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace foresight::metrics
