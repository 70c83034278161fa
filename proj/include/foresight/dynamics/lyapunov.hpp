#pragma once

#include <cstddef>
#include <span>

namespace foresight {

struct EmbeddingConfig {
  std::size_t dimension = 5;   // m, delay-embedding dimension used for neighbour search
  std::size_t delay = 1;       // tau_e in steps
  std::size_t neighbors = 15;  // k_n, minimum neighbour count per reference point
  /// The k_n nearest neighbours must lie within this radius, in units of the series std.
  double radius = 0.3;
  std::size_t matrix_dimension = 2;  // d_M, size of the fitted tangent maps
  /// Singular values of the neighbour displacements below this fraction of the largest are dropped.
  double singular_cutoff = 0.05;
  std::size_t evolution = 1;         // steps between successive reference points
  double step_duration = 1.0;
  /// Share of reference points allowed to lack neighbours before giving up.
  double max_insufficient = 0.2;

  void validate() const;
};

struct LyapunovResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::size_t reference_points = 0;
  std::size_t insufficient = 0;
};

/// Eckmann-style estimate: delay-embed, fit a local linear map on the last d_M delay coordinates
/// from the neighbours of every reference point, and average log R_ii of the QR-propagated frame.
/// Needs at least 500 embedded points. Throws NumericError when too many points lack neighbours.
LyapunovResult lyapunov_eckmann(std::span<const double> series, const EmbeddingConfig& config = {});

}  // namespace foresight
