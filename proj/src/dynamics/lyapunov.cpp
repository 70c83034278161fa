#include "foresight/dynamics/lyapunov.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"

namespace foresight {

void EmbeddingConfig::validate() const {
  if (dimension < 1 || delay < 1) throw ConfigError("lyapunov: embedding dimension and delay must be >= 1");
  if (matrix_dimension < 1 || matrix_dimension > dimension) {
    throw ConfigError("lyapunov: matrix dimension must be in [1, embedding dimension]");
  }
  if (neighbors < matrix_dimension + 1) throw ConfigError("lyapunov: need more neighbours than the matrix dimension");
  if (!(radius > 0.0) || evolution < 1 || !(step_duration > 0.0)) {
    throw ConfigError("lyapunov: radius, evolution and step duration must be positive");
  }
  if (!(singular_cutoff >= 0.0 && singular_cutoff < 1.0)) throw ConfigError("lyapunov: singular cutoff must be in [0, 1)");
  if (!(max_insufficient >= 0.0 && max_insufficient <= 1.0)) throw ConfigError("lyapunov: max_insufficient must be in [0, 1]");
}

LyapunovResult lyapunov_eckmann(std::span<const double> series, const EmbeddingConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.dimension, tau = cfg.delay, dm = cfg.matrix_dimension, ev = cfg.evolution;
  const std::size_t span = (m - 1) * tau;
  if (series.size() <= span + ev) throw UsageError("lyapunov: series too short for the embedding");
  // Points whose image (ev steps later) is still embedded.
  const std::size_t points = series.size() - span - ev;
  if (points < 500) {
    throw UsageError("lyapunov: " + std::to_string(points) + " embedded points, at least 500 are required");
  }
  for (double v : series)
    if (!std::isfinite(v)) throw NumericError("lyapunov: series contains non-finite values");

  double mean = 0.0, sq = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  for (double v : series) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(series.size()));
  if (!(sd > 0.0)) throw NumericError("lyapunov: constant series");
  const double radius = cfg.radius * sd;

  auto coord = [&](std::size_t i, std::size_t c) { return series[i + c * tau]; };
  // Tangent-map coordinates: the last dm delay coordinates of the embedding vector.
  auto tangent = [&](std::size_t i, std::size_t r) { return coord(i, m - dm + r); };

  LyapunovResult result;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dm), static_cast<Eigen::Index>(dm));
  std::vector<double> log_sum(dm, 0.0);
  std::vector<std::pair<double, std::size_t>> dist(points);

  for (std::size_t i = 0; i < points; i += ev) {
    ++result.reference_points;
    for (std::size_t j = 0; j < points; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double diff = coord(j, c) - coord(i, c);
        acc += diff * diff;
      }
      dist[j] = {j == i ? INFINITY : std::sqrt(acc), j};
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(cfg.neighbors - 1), dist.end());
    const std::size_t usable = cfg.neighbors;
    double kth = 0.0;
    for (std::size_t n = 0; n < usable; ++n) kth = std::max(kth, dist[n].first);
    if (kth > radius) {
      ++result.insufficient;
      continue;
    }

    Eigen::MatrixXd X(static_cast<Eigen::Index>(usable), static_cast<Eigen::Index>(dm));
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(usable), static_cast<Eigen::Index>(dm));
    for (std::size_t n = 0; n < usable; ++n) {
      const std::size_t j = dist[n].second;
      for (std::size_t r = 0; r < dm; ++r) {
        X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r)) = tangent(j, r) - tangent(i, r);
        Y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r)) = tangent(j + ev, r) - tangent(i + ev, r);
      }
    }
    // Y ~ X A^T. Neighbours of a low-dimensional attractor are nearly collinear, so directions with
    // tiny spread are cut instead of fitted to curvature.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(cfg.singular_cutoff);
    const Eigen::MatrixXd At = svd.solve(Y);
    const Eigen::MatrixXd B = At.transpose() * Q;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dm), static_cast<Eigen::Index>(dm));
    for (std::size_t r = 0; r < dm; ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      if (R(rr, rr) < 0.0) {
        R.row(rr) *= -1.0;
        Q.col(rr) *= -1.0;
      }
      log_sum[r] += std::log(std::max(R(rr, rr), 1e-300));
    }
  }

  const double bad = static_cast<double>(result.insufficient) / static_cast<double>(result.reference_points);
  if (bad > cfg.max_insufficient) {
    throw NumericError("lyapunov: " + std::to_string(result.insufficient) + " of " +
                       std::to_string(result.reference_points) +
                       " reference points lack neighbours within the radius; use a larger radius or a longer series");
  }
  const std::size_t used = result.reference_points - result.insufficient;
  std::vector<double> lambdas(dm);
  for (std::size_t r = 0; r < dm; ++r)
    lambdas[r] = log_sum[r] / (static_cast<double>(used) * static_cast<double>(ev) * cfg.step_duration);
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  result.lambda1 = lambdas[0];
  result.lambda2 = dm > 1 ? lambdas[1] : -INFINITY;
  if (result.insufficient > 0) {
    log::info("lyapunov: skipped " + std::to_string(result.insufficient) + " reference points without neighbours");
  }
  return result;
}

}  // namespace foresight
