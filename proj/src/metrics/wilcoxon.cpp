#include "foresight/metrics/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "foresight/errors.hpp"

namespace foresight::metrics {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
  std::vector<double> d;
  for (double v : differences) {
    if (!std::isfinite(v)) throw NumericError("wilcoxon: non-finite difference");
    if (v != 0.0) d.push_back(v);
  }
  if (d.empty()) throw UsageError("wilcoxon: all differences are zero");
  const std::size_t n = d.size();
  if (n < 5) throw UsageError("wilcoxon: needs at least 5 non-zero differences, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  // Twice the average rank keeps tied ranks integral.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long r2 = static_cast<long>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  WilcoxonResult r;
  r.n = n;
  long wplus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) wplus2 += rank2[i];
  }
  r.w_plus = wplus2 / 2.0;
  r.w_minus = (total2 - wplus2) / 2.0;
  r.statistic = std::min(r.w_plus, r.w_minus);

  if (n <= 12) {
    r.exact = true;
    // Null distribution of 2*W+ over all 2^n sign assignments.
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long s = total2; s >= rank2[i]; --s) ways[s] += ways[s - rank2[i]];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double ge = 0.0, le = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s >= wplus2) ge += ways[s];
      if (s <= wplus2) le += ways[s];
    }
    r.p_greater = ge / all;
    r.p_less = le / all;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    r.p_greater = 1.0 - normal_cdf((r.w_plus - mean - 0.5) / sd);
    r.p_less = normal_cdf((r.w_plus - mean + 0.5) / sd);
  }
  r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, r.p_less));
  return r;
}

}  // namespace foresight::metrics
