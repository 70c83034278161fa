#include "foresight/metrics/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"

namespace foresight::metrics {
namespace {

constexpr double kSmoothing = 1e-10;

std::vector<double> normalised(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) total += c + kSmoothing;
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = (counts[i] + kSmoothing) / total;
  return p;
}

}  // namespace

double js_distance_discrete(std::span<const double> pc, std::span<const double> qc) {
  if (pc.size() != qc.size() || pc.empty()) throw ShapeError("js_distance: histograms differ in length");
  const auto p = normalised(pc);
  const auto q = normalised(qc);
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    js += 0.5 * p[i] * std::log2(p[i] / m) + 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::sqrt(std::clamp(js, 0.0, 1.0));
}

double js_distance(const nd::Tensor& a, const nd::Tensor& b, std::size_t bins) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("js_distance: samples must be [N,d] and [M,d], got " + nd::to_string(a.shape()) + " and " +
                     nd::to_string(b.shape()));
  }
  if (a.dim(0) < 10 || b.dim(0) < 10) throw UsageError("js_distance: needs at least 10 samples on each side");
  if (bins < 1) throw ConfigError("js_distance: bins must be >= 1");
  const std::size_t d = a.dim(1);
  double total = 0.0;
  for (std::size_t f = 0; f < d; ++f) {
    double lo = a.at(0, f), hi = a.at(0, f);
    for (std::size_t i = 0; i < a.dim(0); ++i) lo = std::min(lo, a.at(i, f)), hi = std::max(hi, a.at(i, f));
    for (std::size_t i = 0; i < b.dim(0); ++i) lo = std::min(lo, b.at(i, f)), hi = std::max(hi, b.at(i, f));
    if (!(hi > lo)) {
      log::info("js_distance: feature " + std::to_string(f) + " is constant, contributes 0");
      continue;
    }
    auto histogram = [&](const nd::Tensor& s) {
      std::vector<double> h(bins, 0.0);
      for (std::size_t i = 0; i < s.dim(0); ++i) {
        auto bin = static_cast<std::size_t>((s.at(i, f) - lo) / (hi - lo) * static_cast<double>(bins));
        h[std::min(bin, bins - 1)] += 1.0;
      }
      return h;
    };
    total += js_distance_discrete(histogram(a), histogram(b));
  }
  return total / static_cast<double>(d);
}

}  // namespace foresight::metrics
