#include "foresight/metrics/regression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foresight/errors.hpp"

namespace foresight::metrics {
namespace {

void check_pair(const char* op, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError(std::string(op) + ": need equal non-empty lengths, got " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double r_squared(std::span<const double> y, std::span<const double> yhat) {
  check_pair("r_squared", y, yhat);
  const double mu = mean(y);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mu) * (y[i] - mu);
  }
  if (!(ss_tot > 0.0)) throw NumericError("r_squared: ground truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

double mean_squared_error(std::span<const double> y, std::span<const double> yhat) {
  check_pair("mean_squared_error", y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double nrmse(std::span<const double> y, std::span<const double> yhat) {
  check_pair("nrmse", y, yhat);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw NumericError("nrmse: ground truth has zero range");
  return std::sqrt(mean_squared_error(y, yhat)) / range;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair("pearson", x, y);
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0 && syy > 0.0)) throw NumericError("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  check_pair("ols_slope", x, y);
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw NumericError("ols_slope: constant regressor");
  return sxy / sxx;
}

}  // namespace foresight::metrics
