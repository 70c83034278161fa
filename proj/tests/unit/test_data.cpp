#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "foresight/data/csv.hpp"
#include "foresight/data/generator.hpp"
#include "foresight/errors.hpp"
#include "foresight/metrics/divergence.hpp"

using namespace foresight;

namespace {

TaskSpec clean_spec(std::size_t d, std::size_t n = 600) {
  TaskSpec s;
  s.id = TaskId{3};
  s.speed = 0.9;
  s.incline = 0.5;
  s.input_dim = d;
  s.samples = n;
  s.noise = 0.0;
  s.seed = 11;
  s.sample_seed = 12;
  return s;
}

TaskSeries tiny_series(std::size_t n, std::vector<std::int64_t> trials = {}) {
  TaskSeries s;
  s.task = TaskId{0};
  s.states = nd::Tensor(nd::Shape{n, 2});
  s.targets.resize(n);
  s.trial = trials.empty() ? std::vector<std::int64_t>(n, 0) : trials;
  for (std::size_t k = 0; k < n; ++k) {
    s.states.at(k, 0) = static_cast<double>(k);
    s.states.at(k, 1) = -static_cast<double>(k);
    s.targets[k] = 0.5 * static_cast<double>(k);
  }
  s.train_end = n - 1;
  return s;
}

std::string csv_with_trial_change(std::size_t rows, std::size_t change_at) {
  std::ostringstream out;
  out << "feature_0,feature_1,target,trial_id\n";
  for (std::size_t i = 0; i < rows; ++i) out << i << ',' << 2 * i << ',' << 0.1 * i << ',' << (i < change_at ? "a" : "b") << '\n';
  return out.str();
}

// Ordinary least squares of each column of Y on [X, 1]; returns the mean R^2 over columns.
double least_squares_r2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design << x, Eigen::VectorXd::Ones(x.rows());
  const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd resid = y - design * coef;
  double total = 0.0;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double mean = y.col(j).mean();
    const double ss_tot = (y.col(j).array() - mean).square().sum();
    total += 1.0 - resid.col(j).squaredNorm() / ss_tot;
  }
  return total / static_cast<double>(y.cols());
}

}  // namespace

TEST_CASE("noise-free two-dimensional states lie on a fixed ellipse") {
  const TaskSpec spec = clean_spec(2);
  const TaskSeries s = generate_task(spec);
  const nd::Tensor m = mixing_matrix(spec);
  const double det = m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0);
  REQUIRE(std::abs(det) > 1e-6);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double x0 = s.states.at(k, 0), x1 = s.states.at(k, 1);
    const double u = (m.at(1, 1) * x0 - m.at(0, 1) * x1) / det;
    const double v = (-m.at(1, 0) * x0 + m.at(0, 0) * x1) / det;
    CHECK(u * u + v * v == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("generation is deterministic in the spec") {
  TaskSpec spec = clean_spec(8);
  spec.noise = 0.05;
  spec.phase_jitter = 0.05;
  spec.trials = 3;
  const TaskSeries a = generate_task(spec), b = generate_task(spec);
  CHECK(a.states == b.states);
  CHECK(a.targets == b.targets);
  CHECK(a.trial == b.trial);

  TaskSpec other = spec;
  other.sample_seed += 1;
  CHECK(generate_task(other).states != a.states);
  CHECK(mixing_matrix(other) == mixing_matrix(spec));
}

TEST_CASE("targets follow the gait profile of the latent phase") {
  const TaskSpec spec = clean_spec(4);
  const TaskSeries s = generate_task(spec);
  REQUIRE(s.latent);
  const double step = 2.0 * M_PI * spec.speed * spec.dt;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double th = s.latent->phase[k];
    const double y = (1.0 + 0.3 * spec.incline) * std::sin(th) + 0.2 * spec.incline * std::sin(2.0 * th);
    CHECK(s.targets[k] == doctest::Approx(y).epsilon(1e-12));
    if (k > 0) CHECK(s.latent->phase[k] - s.latent->phase[k - 1] == doctest::Approx(step));
  }
}

TEST_CASE("next state is a linear function of current state and target without noise") {
  for (std::size_t d : {2u, 4u, 8u}) {
    CAPTURE(d);
    TaskSpec spec = clean_spec(d, 800);
    spec.trials = 4;
    const TaskSeries s = generate_task(spec);
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k + 1 < s.size(); ++k)
      if (s.trial[k] == s.trial[k + 1]) rows.push_back(k);
    Eigen::MatrixXd x(rows.size(), d + 1), y(rows.size(), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t i = 0; i < d; ++i) {
        x(r, i) = s.states.at(rows[r], i);
        y(r, i) = s.states.at(rows[r] + 1, i);
      }
      x(r, d) = s.targets[rows[r]];
    }
    CHECK(least_squares_r2(x, y) > 0.999);
  }
}

TEST_CASE("suites have the documented task grid") {
  SuiteOptions o;
  o.samples = 300;
  const auto embry = make_suite(SuiteKind::embry_like, o);
  REQUIRE(embry.size() == 9);
  std::set<std::pair<double, double>> grid;
  for (const auto& t : embry) grid.emplace(t.speed, t.incline);
  CHECK(grid.size() == 9);
  for (double s : {0.8, 1.0, 1.2})
    for (double a : {-1.0, 0.0, 1.0}) CHECK(grid.count({s, a}) == 1);

  const auto enabl3s = make_suite(SuiteKind::enabl3s_like, o);
  REQUIRE(enabl3s.size() == 5);
  std::set<std::uint32_t> ids;
  for (const auto& t : enabl3s) ids.insert(t.id.value);
  CHECK(ids.size() == 5);
  CHECK_THROWS_AS(parse_suite_kind("walking"), ConfigError);
}

TEST_CASE("spec validation rejects bad parameters") {
  TaskSpec s = clean_spec(8);
  s.speed = 0.0;
  CHECK_THROWS_AS(generate_task(s), ConfigError);
  s = clean_spec(1);
  CHECK_THROWS_AS(generate_task(s), ConfigError);
  s = clean_spec(8, 20);
  CHECK_THROWS_AS(s.validate(10), ConfigError);
  CHECK_NOTHROW(s.validate(6));
}

TEST_CASE("shift of magnitude zero is the identity") {
  TaskSpec spec = clean_spec(8);
  spec.noise = 0.05;
  const TaskSeries s = generate_task(spec);
  for (auto kind : {ShiftKind::phase_offset, ShiftKind::amplitude_scale, ShiftKind::additive_bias}) {
    const TaskSeries out = apply_shift(s, {kind, 0.0});
    CHECK(out.states == s.states);
    CHECK(out.targets == s.targets);
  }
  CHECK_THROWS_AS(apply_shift(s, {ShiftKind::additive_bias, std::nan("")}), ConfigError);
}

TEST_CASE("additive bias moves each marginal mean by the mixed offset") {
  TaskSpec spec = clean_spec(8);
  spec.noise = 0.05;
  const TaskSeries s = generate_task(spec);
  const nd::Tensor m = mixing_matrix(spec);
  const double b = 0.4;
  const TaskSeries out = apply_shift(s, {ShiftKind::additive_bias, b});
  for (std::size_t i = 0; i < 8; ++i) {
    double expected = 0.0, before = 0.0, after = 0.0;
    for (std::size_t j = 0; j < 8; ++j) expected += m.at(i, j) * b;
    for (std::size_t k = 0; k < s.size(); ++k) {
      before += s.states.at(k, i);
      after += out.states.at(k, i);
    }
    CHECK((after - before) / static_cast<double>(s.size()) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(out.targets == s.targets);

  TaskSeries bare = tiny_series(6);
  const TaskSeries moved = apply_shift(bare, {ShiftKind::additive_bias, 1.5});
  CHECK(moved.states.at(2, 1) == doctest::Approx(bare.states.at(2, 1) + 1.5));
  CHECK_THROWS_AS(apply_shift(bare, {ShiftKind::phase_offset, 0.3}), UsageError);
}

TEST_CASE("amplitude scaling multiplies states and targets") {
  const TaskSeries s = generate_task(clean_spec(4));
  const TaskSeries out = apply_shift(s, {ShiftKind::amplitude_scale, 0.25});
  for (std::size_t k = 0; k < s.size(); k += 37) {
    CHECK(out.targets[k] == doctest::Approx(1.25 * s.targets[k]));
    CHECK(out.states.at(k, 3) == doctest::Approx(1.25 * s.states.at(k, 3)));
  }
}

TEST_CASE("phase offset keeps the noise realisation") {
  TaskSpec spec = clean_spec(4);
  spec.noise = 0.1;
  const TaskSeries s = generate_task(spec);
  const double full_turn = 2.0 * M_PI;
  const TaskSeries same = apply_shift(s, {ShiftKind::phase_offset, full_turn});
  for (std::size_t k = 0; k < s.size(); k += 13)
    for (std::size_t i = 0; i < 4; ++i) CHECK(same.states.at(k, i) == doctest::Approx(s.states.at(k, i)).epsilon(1e-9));
}

TEST_CASE("divergence grows with shift magnitude") {
  TaskSpec spec = clean_spec(8, 2000);
  spec.noise = 0.05;
  spec.phase_jitter = 0.05;
  spec.trials = 4;
  const TaskSeries s = generate_task(spec);
  for (auto kind : {ShiftKind::additive_bias, ShiftKind::amplitude_scale}) {
    CAPTURE(to_string(kind));
    double previous = -1.0;
    for (double mag : {0.0, 0.2, 0.4, 0.6, 0.8}) {
      const double js = metrics::js_distance(s.states, apply_shift(s, {kind, mag}).states);
      CHECK(js >= previous);
      previous = js;
    }
    CHECK(previous > 0.1);
  }
}

TEST_CASE("window counts per trial") {
  TaskSeries s = tiny_series(5);
  CHECK(make_windows(s, 5).size() == 1);
  CHECK(make_windows(s, 2).size() == 4);
  CHECK(make_windows(s, 6).empty());
  CHECK_THROWS(make_windows(s, 0));

  s = tiny_series(9, {0, 0, 0, 0, 1, 1, 1, 2, 2});
  // sum over trials of max(0, len - T + 1) with lengths 4, 3, 2
  CHECK(make_windows(s, 1).size() == 9);
  CHECK(make_windows(s, 2).size() == 3 + 2 + 1);
  CHECK(make_windows(s, 3).size() == 2 + 1);
  CHECK(make_windows(s, 4).size() == 1);
}

TEST_CASE("window rows align with the series") {
  TaskSpec spec = clean_spec(8, 300);
  spec.noise = 0.05;
  spec.trials = 3;
  const TaskSeries s = generate_task(spec);
  const auto windows = make_windows(s, 10);
  REQUIRE(!windows.empty());
  for (const auto& w : windows) {
    REQUIRE(w.inputs.dim(0) == 10);
    for (std::size_t i = 0; i < 8; ++i) CHECK(w.inputs.at(9, i) == s.states.at(w.step, i));
    CHECK(w.target == s.targets[w.step]);
    CHECK(w.task == s.task);
    CHECK(s.trial[w.step - 9] == s.trial[w.step]);
  }
  CHECK(window_at(s, windows[5].step, 10) == windows[5].inputs);
}

TEST_CASE("train and validation windows partition the series") {
  TaskSpec spec = clean_spec(4, 500);
  spec.noise = 0.02;
  const TaskSeries s = generate_task(spec);
  CHECK(s.train_end == 400);
  const auto train = make_windows(s, 5, Split::train);
  const auto val = make_windows(s, 5, Split::validation);
  std::set<std::size_t> train_rows, val_rows;
  for (const auto& w : train) {
    CHECK(w.step < s.train_end);
    CHECK(w.step >= 4);
    for (std::size_t r = w.step - 4; r <= w.step; ++r) train_rows.insert(r);
  }
  for (const auto& w : val) {
    CHECK(w.step - 4 >= s.train_end);
    for (std::size_t r = w.step - 4; r <= w.step; ++r) val_rows.insert(r);
  }
  for (std::size_t r : val_rows) CHECK(train_rows.count(r) == 0);
  CHECK(train_rows.size() + val_rows.size() == s.size());

  const TaskSeries test = generate_task(held_out_spec(spec));
  CHECK(test.states != s.states);
  CHECK(mixing_matrix(held_out_spec(spec)) == mixing_matrix(spec));
}

TEST_CASE("csv with three rows") {
  const std::string text = "feature_0,feature_1,target,trial_id\n1,2,3,0\n4,5,6,0\n7,8,9,1\n";
  const TaskSeries s = parse_csv(text);
  CHECK(s.size() == 3);
  CHECK(s.dim() == 2);
  CHECK(s.states.at(2, 1) == 8.0);
  CHECK(s.targets[1] == 6.0);
  CHECK(s.trial[1] == s.trial[0]);
  CHECK(s.trial[2] != s.trial[1]);
}

TEST_CASE("csv errors name the problem") {
  auto message = [](const std::string& text) {
    try {
      parse_csv(text, {}, {}, 0.8, "walk.csv");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string missing = message("feature_0,feature_1,trial_id\n1,2,0\n");
  CHECK(missing.find("target") != std::string::npos);
  CHECK(missing.find("walk.csv") != std::string::npos);

  const std::string bad_cell = message("feature_0,feature_1,target,trial_id\n1,2,3,0\n4,x,6,0\n");
  CHECK(bad_cell.find(":3") != std::string::npos);
  CHECK(bad_cell.find("non-numeric") != std::string::npos);

  const std::string ragged = message("feature_0,feature_1,target,trial_id\n1,2,3,0\n4,5,6,0\n7,8\n");
  CHECK(ragged.find(":4") != std::string::npos);
  CHECK(ragged.find("ragged") != std::string::npos);

  CHECK(!message("").empty());
  CHECK(!message("feature_0,target,trial_id\n").empty());
  CHECK_THROWS_AS(load_csv("/nonexistent/walk.csv"), DataError);
}

TEST_CASE("csv trial change leaves no window across the boundary") {
  const TaskSeries s = parse_csv(csv_with_trial_change(100, 50));
  CHECK(s.trial[49] != s.trial[50]);
  for (std::size_t T : {2u, 3u, 10u}) {
    const auto windows = make_windows(s, T);
    CHECK(windows.size() == 2 * (50 - T + 1));
    for (const auto& w : windows) CHECK(!(w.step - (T - 1) <= 49 && w.step >= 50));
  }
}

TEST_CASE("csv round trip is exact") {
  TaskSpec spec = clean_spec(8, 240);
  spec.noise = 0.05;
  spec.trials = 3;
  const TaskSeries s = generate_task(spec);
  const auto path = std::filesystem::temp_directory_path() / "foresight_test_data_roundtrip.csv";
  write_csv(path, s);
  const TaskSeries back = load_csv(path, {}, s.task, 0.8);
  std::filesystem::remove(path);
  CHECK(back.states == s.states);
  CHECK(back.targets == s.targets);
  CHECK(back.trial == s.trial);
  CHECK(back.train_end == s.train_end);
  CHECK(to_csv(back) == to_csv(s));
}

TEST_CASE("series validation catches inconsistencies") {
  TaskSeries s = tiny_series(5);
  CHECK_NOTHROW(s.validate());
  s.targets.pop_back();
  CHECK_THROWS_AS(s.validate(), DataError);
  s = tiny_series(5);
  s.states.at(1, 1) = std::nan("");
  CHECK_THROWS_AS(s.validate(), DataError);
  s = tiny_series(5);
  s.train_end = 6;
  CHECK_THROWS_AS(s.validate(), DataError);
}
