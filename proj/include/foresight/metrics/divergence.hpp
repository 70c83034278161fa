#pragma once

#include <cstddef>

#include "foresight/ndkernel/tensor.hpp"

namespace foresight::metrics {

/// Jensen-Shannon distance between two samples [N,d] and [M,d], averaged over features.
/// Each feature is histogrammed over the pooled [min, max] with `bins` bins and 1e-10
/// additive smoothing; base-2 logs put the result in [0, 1].
double js_distance(const nd::Tensor& sample_a, const nd::Tensor& sample_b, std::size_t bins = 50);

/// Base-2 JS distance between two discrete distributions (normalised internally).
double js_distance_discrete(std::span<const double> p, std::span<const double> q);

}  // namespace foresight::metrics
