#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "foresight/errors.hpp"
#include "foresight/metrics/divergence.hpp"
#include "foresight/metrics/forgetting.hpp"
#include "foresight/metrics/records.hpp"
#include "foresight/metrics/regression.hpp"
#include "foresight/metrics/wilcoxon.hpp"
#include "foresight/ndkernel/tensor.hpp"

using namespace foresight;
using namespace foresight::metrics;

namespace {

nd::Tensor gaussian_sample(std::size_t n, std::size_t d, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, sd);
  nd::Tensor t(nd::Shape{n, d});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Brute-force null distribution: every sign assignment of the given absolute ranks.
double enumerated_p_greater(const std::vector<double>& ranks, double w_plus) {
  const std::size_t n = ranks.size();
  std::size_t hits = 0, total = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) w += ranks[i];
    if (w >= w_plus - 1e-9) ++hits;
    ++total;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<double> average_ranks(const std::vector<double>& d) {
  std::vector<double> r(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double below = 0.0, equal = 0.0;
    for (double v : d) {
      if (std::abs(v) < std::abs(d[i])) below += 1.0;
      if (std::abs(v) == std::abs(d[i])) equal += 1.0;
    }
    r[i] = below + (equal + 1.0) / 2.0;
  }
  return r;
}

double kl_bits(double p, double q) { return p > 0.0 ? p * std::log2(p / q) : 0.0; }

}  // namespace

TEST_CASE("r squared hand values") {
  const std::vector<double> y{1, 2, 3};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>{2, 2, 2}) == doctest::Approx(0.0));
  CHECK(r_squared(y, std::vector<double>{1, 2, 5}) == doctest::Approx(-1.0));
  CHECK_THROWS(r_squared(std::vector<double>{4, 4, 4}, y));
  CHECK_THROWS(r_squared(y, std::vector<double>{1, 2}));
  CHECK_THROWS(r_squared(std::vector<double>{}, std::vector<double>{}));
}

TEST_CASE("r squared never exceeds one") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> y(12), p(12);
    for (auto& v : y) v = g(rng);
    for (std::size_t i = 0; i < y.size(); ++i) p[i] = y[i] + (rep % 4 == 0 ? 0.0 : 0.1 * g(rng));
    const double r2 = r_squared(y, p);
    CHECK(r2 <= 1.0);
    CHECK((r2 == 1.0) == (p == y));
  }
}

TEST_CASE("nrmse hand values and scale invariance") {
  const std::vector<double> y{0, 1};
  CHECK(nrmse(y, y) == 0.0);
  CHECK(nrmse(y, std::vector<double>{1, 0}) == doctest::Approx(1.0));
  CHECK_THROWS(nrmse(std::vector<double>{2, 2}, y));

  const std::vector<double> a{0.3, -1.2, 2.5, 0.9, 1.1}, b{0.1, -1.0, 2.2, 1.4, 0.7};
  const double base = nrmse(a, b);
  for (double c : {0.01, 3.0, 250.0}) {
    std::vector<double> ca, cb;
    for (double v : a) ca.push_back(c * v);
    for (double v : b) cb.push_back(c * v);
    CHECK(nrmse(ca, cb) == doctest::Approx(base).epsilon(1e-12));
  }
  CHECK(mean_squared_error(y, std::vector<double>{1, 0}) == 1.0);
}

TEST_CASE("pearson and slope") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(ols_slope(x, y) == doctest::Approx(2.0));
  const std::vector<double> z{9, 7, 5, 3};
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
}

TEST_CASE("backward transfer and forgetting ratio") {
  ErrorMatrix m;
  m.set(1, 1, 0.05);
  m.set(2, 1, 0.15);
  m.set(2, 2, 0.08);
  CHECK(bwt(m, 2) == doctest::Approx(-0.10));
  CHECK(forgetting_ratio(m, 1, 2) == doctest::Approx(2.0));
  CHECK(forgetting_ratio(m, 2, 2) == 0.0);
  CHECK(m.lower_triangle_complete());

  ErrorMatrix same;
  for (std::size_t i = 1; i <= 4; ++i)
    for (std::size_t j = 1; j <= i; ++j) same.set(i, j, 0.1 * static_cast<double>(j));
  for (std::size_t t = 2; t <= 4; ++t) CHECK(bwt(same, t) == 0.0);
  for (std::size_t t = 1; t <= 4; ++t) CHECK(forgetting_ratio(same, t, 4) == 0.0);

  ErrorMatrix doubled;
  doubled.set(1, 1, 0.2);
  doubled.set(2, 1, 0.4);
  CHECK(forgetting_ratio(doubled, 1, 2) == doctest::Approx(1.0));
}

TEST_CASE("error matrix errors") {
  ErrorMatrix m;
  m.set(1, 1, 0.1);
  m.set(3, 3, 0.1);
  CHECK(!m.lower_triangle_complete());
  try {
    bwt(m, 3);
    FAIL("expected an error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("(") != std::string::npos);
  }
  CHECK_THROWS(bwt(m, 1));
  CHECK_THROWS(m.set(0, 1, 0.1));
  CHECK_THROWS(m.set(1, 1, -0.1));
  CHECK_THROWS(m.set(1, 1, std::nan("")));
  ErrorMatrix zero;
  zero.set(1, 1, 0.0);
  zero.set(2, 1, 0.1);
  CHECK_THROWS(forgetting_ratio(zero, 1, 2));
}

TEST_CASE("forgetting quantities recompute bit for bit from dumped records") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 0.5);
  ErrorMatrix m;
  for (std::size_t i = 1; i <= 5; ++i)
    for (std::size_t j = 1; j <= i; ++j) m.set(i, j, u(rng));
  std::vector<MetricRecord> dumped;
  for (const auto& [key, value] : m.entries())
    dumped.push_back({"r", "s", std::to_string(key.first) + "/" + std::to_string(key.second), "nrmse", value, 0});
  const auto back = records_from_csv(records_to_csv(dumped));
  ErrorMatrix m2;
  for (const auto& r : back) {
    const auto slash = r.task.find('/');
    m2.set(std::stoul(r.task.substr(0, slash)), std::stoul(r.task.substr(slash + 1)), r.value);
  }
  for (std::size_t t = 2; t <= 5; ++t) CHECK(bwt(m2, t) == bwt(m, t));
  for (std::size_t t = 1; t <= 5; ++t) CHECK(forgetting_ratio(m2, t, 5) == forgetting_ratio(m, t, 5));
}

TEST_CASE("js distance extremes") {
  const nd::Tensor a = gaussian_sample(500, 3, 0.0, 1.0, 1);
  CHECK(js_distance(a, a) == doctest::Approx(0.0).epsilon(1e-6));

  nd::Tensor lo(nd::Shape{100, 1}), hi(nd::Shape{100, 1});
  for (std::size_t i = 0; i < 100; ++i) {
    lo.at(i, 0) = static_cast<double>(i) / 100.0;
    hi.at(i, 0) = 10.0 + static_cast<double>(i) / 100.0;
  }
  CHECK(js_distance(lo, hi) == doctest::Approx(1.0).epsilon(1e-6));

  nd::Tensor constant(nd::Shape{50, 2});
  for (std::size_t i = 0; i < 50; ++i) constant.at(i, 1) = static_cast<double>(i);
  CHECK(js_distance(constant, constant) == doctest::Approx(0.0).epsilon(1e-6));

  CHECK_THROWS(js_distance(gaussian_sample(5, 2, 0, 1, 2), a));
  CHECK_THROWS(js_distance(gaussian_sample(50, 2, 0, 1, 2), a));
}

TEST_CASE("js distance of shifted gaussians matches numerical integration") {
  // Dense-grid integration of the continuous JS divergence between N(0,1) and N(3,1).
  const double mu = 3.0;
  double js = 0.0;
  const double lo = -12.0, hi = 15.0, h = 1e-4;
  for (double x = lo; x < hi; x += h) {
    const double p = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double q = std::exp(-0.5 * (x - mu) * (x - mu)) / std::sqrt(2.0 * M_PI);
    const double m = 0.5 * (p + q);
    if (m > 0.0) js += 0.5 * (kl_bits(p, m) + kl_bits(q, m)) * h;
  }
  const double oracle = std::sqrt(js);
  const nd::Tensor a = gaussian_sample(50000, 1, 0.0, 1.0, 3);
  const nd::Tensor b = gaussian_sample(50000, 1, mu, 1.0, 4);
  CHECK(std::abs(js_distance(a, b) - oracle) < 0.02);
}

TEST_CASE("js distance is a bounded symmetric metric") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int rep = 0; rep < 30; ++rep) {
    const nd::Tensor a = gaussian_sample(300, 2, u(rng), 1.0, rng());
    const nd::Tensor b = gaussian_sample(300, 2, u(rng), 0.5, rng());
    const nd::Tensor c = gaussian_sample(300, 2, u(rng), 1.5, rng());
    const double ab = js_distance(a, b), ba = js_distance(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);

    // The triangle inequality holds for a fixed binning, so compare discrete histograms.
    std::vector<double> p(10), q(10), r(10);
    for (auto* v : {&p, &q, &r})
      for (double& x : *v) x = std::abs(u(rng)) + (rep % 3 == 0 ? 0.0 : 0.01);
    const double pq = js_distance_discrete(p, q), qr = js_distance_discrete(q, r), pr = js_distance_discrete(p, r);
    CHECK(pr <= pq + qr + 1e-12);
  }
}

TEST_CASE("discrete js hand values") {
  const std::vector<double> p{1, 0}, q{0, 1};
  CHECK(js_distance_discrete(p, q) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(js_distance_discrete(p, p) == doctest::Approx(0.0).epsilon(1e-6));
  // P=(1,0), Q=(1/2,1/2): JSD = 1/2 KL(P||M) + 1/2 KL(Q||M) with M=(3/4,1/4)
  const double jsd = 0.5 * std::log2(4.0 / 3.0) + 0.5 * (0.5 * std::log2(2.0 / 3.0) + 0.5 * std::log2(2.0));
  CHECK(js_distance_discrete(p, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::sqrt(jsd)).epsilon(1e-6));
}

TEST_CASE("wilcoxon all positive differences") {
  const std::vector<double> d{0.3, 1.1, 0.2, 0.9, 2.0, 0.5};
  const auto r = wilcoxon_signed_rank(d);
  CHECK(r.exact);
  CHECK(r.n == 6);
  CHECK(r.statistic == 0.0);
  CHECK(r.w_plus == 21.0);
  CHECK(r.p_greater == doctest::Approx(1.0 / 64.0));
  CHECK(r.p_two_sided == doctest::Approx(2.0 / 64.0));
  CHECK(r.p_less == doctest::Approx(1.0));
}

TEST_CASE("wilcoxon symmetric pairs") {
  const std::vector<double> d{1, -1, 2, -2, 3, -3, 4, -4};
  const auto r = wilcoxon_signed_rank(d);
  CHECK(r.w_plus == r.w_minus);
  CHECK(r.p_two_sided == doctest::Approx(1.0));

  std::vector<double> big;
  for (int i = 1; i <= 15; ++i) {
    big.push_back(i);
    big.push_back(-i);
  }
  const auto approx = wilcoxon_signed_rank(big);
  CHECK(!approx.exact);
  CHECK(approx.p_two_sided == doctest::Approx(1.0));
}

TEST_CASE("wilcoxon exact p matches brute-force enumeration") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> mag(1, 6);
  std::bernoulli_distribution sign(0.65);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 5 + static_cast<std::size_t>(rep % 8);
    std::vector<double> d(n);
    for (auto& v : d) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);  // coarse values give ties
    const auto r = wilcoxon_signed_rank(d);
    const auto ranks = average_ranks(d);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (d[i] > 0) w_plus += ranks[i];
    CHECK(r.w_plus == doctest::Approx(w_plus));
    CHECK(r.p_greater == doctest::Approx(enumerated_p_greater(ranks, w_plus)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon normal approximation is close to enumeration") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> g(0.4, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> d(16);
    for (auto& v : d) v = g(rng);
    const auto r = wilcoxon_signed_rank(d);
    CHECK(!r.exact);
    const double brute = enumerated_p_greater(average_ranks(d), r.w_plus);
    CHECK(std::abs(r.p_greater - brute) < 0.01);
  }
}

TEST_CASE("wilcoxon statistic is invariant to positive rescaling") {
  const std::vector<double> d{0.4, -0.1, 0.7, 0.2, -0.5, 1.3, 0.9, -0.05, 0.3};
  const auto base = wilcoxon_signed_rank(d);
  for (double c : {1e-3, 2.0, 1e4}) {
    std::vector<double> s;
    for (double v : d) s.push_back(c * v);
    const auto r = wilcoxon_signed_rank(s);
    CHECK(r.statistic == base.statistic);
    CHECK(r.p_two_sided == base.p_two_sided);
  }
  std::vector<double> cubed;
  for (double v : d) cubed.push_back(v * v * v);
  CHECK(wilcoxon_signed_rank(cubed).statistic == base.statistic);
}

TEST_CASE("wilcoxon errors and zeros") {
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{0, 0, 0, 0, 0, 0}), UsageError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 0, 0, 3}), UsageError);
  const auto r = wilcoxon_signed_rank(std::vector<double>{0, 1, 2, 3, 4, 5, 0});
  CHECK(r.n == 5);
  CHECK(r.p_greater == doctest::Approx(1.0 / 32.0));
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(5e-5) == "****");
  CHECK(significance_stars(5e-4) == "***");
  CHECK(significance_stars(5e-3) == "**");
  CHECK(significance_stars(0.03) == "ns");
  CHECK(significance_stars(0.5) == "ns");
}

TEST_CASE("records round trip through csv and json") {
  std::vector<MetricRecord> recs{
      {"run-1", "er", "0", "r2@0", 0.1 + 0.2, 3},
      {"run-1", "prospective", "mean", "fgsm_r2@0.05", -1.0 / 3.0, 4},
      {"run-1", "none", "2", "bwt", 1e-300, 0},
  };
  CHECK(records_from_csv(records_to_csv(recs)) == recs);
  CHECK(records_from_json(records_to_json(recs)) == recs);
  CHECK(records_to_csv(recs).rfind("run_id,strategy,task,metric,value,seed\n", 0) == 0);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);

  recs[1].value = std::nan("");
  CHECK_THROWS_AS(validate_records(recs), NumericError);
  CHECK_THROWS(records_from_csv("run_id,strategy,task,metric,value,seed\nr,s,t,m,notanumber,0\n"));
}
