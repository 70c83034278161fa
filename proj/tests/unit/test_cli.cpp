#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "foresight/cli/compare.hpp"
#include "foresight/cli/experiment.hpp"
#include "foresight/cli/experiment_config.hpp"
#include "foresight/data/csv.hpp"
#include "foresight/errors.hpp"
#include "foresight/metrics/records.hpp"
#include "foresight/metrics/regression.hpp"

using namespace foresight;
using namespace foresight::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("foresight_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Runs the command line tool and returns its exit status.
int tool(const std::string& args) {
  const char* exe = std::getenv("FORESIGHT_TOOL");
  REQUIRE_MESSAGE(exe != nullptr, "FORESIGHT_TOOL must point at the foresight executable");
  const std::string cmd = std::string("\"") + exe + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json tiny_json() {
  return nlohmann::json::parse(R"({
    "schema": 1,
    "name": "tiny",
    "suite": {"kind": "enabl3s_like", "samples": 300, "test_samples": 200, "order": [0, 1]},
    "strategies": ["none"],
    "backbone": {"kind": "mlp"},
    "seeds": [0],
    "train": {"max_epochs": 2, "dynamics_epochs": 2}
  })");
}

std::vector<metrics::MetricRecord> synthetic_records(std::size_t seeds, double gap, const std::string& metric = "mean_fr") {
  std::vector<metrics::MetricRecord> out;
  for (std::size_t s = 0; s < seeds; ++s) {
    const double base = 0.1 + 0.01 * static_cast<double>(s % 7);
    out.push_back({"r", "er", "mean", metric, base, s});
    out.push_back({"r", "prospective", "mean", metric, base + gap * (1.0 + 0.1 * static_cast<double>(s)), s});
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing rejects mistakes") {
  auto expect_error = [](nlohmann::json j, const std::string& fragment) {
    try {
      config_from_json(j).validate();
      FAIL("expected a config error for " << fragment);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  auto j = tiny_json();
  j["strategies"] = nlohmann::json::array();
  expect_error(j, "strateg");
  j = tiny_json();
  j["seeds"] = nlohmann::json::array();
  expect_error(j, "seed");
  j = tiny_json();
  j["trian"] = nlohmann::json::object();
  expect_error(j, "trian");
  j = tiny_json();
  j["strategies"] = {"replay"};
  expect_error(j, "replay");
  j = tiny_json();
  j["suite"] = {{"csv", {"/nonexistent/task.csv"}}};
  expect_error(j, "/nonexistent/task.csv");
  j = tiny_json();
  j["evaluation"] = {{"shift_sweep", {{"enabled", true}, {"magnitudes", {0, 0.5}}}}};
  j["strategies"] = {"er", "prospective"};
  expect_error(j, "magnitudes");
  j = tiny_json();
  j["schema"] = 99;
  expect_error(j, "schema");
}

TEST_CASE("config echo round trips") {
  const ExperimentConfig c = config_from_json(tiny_json());
  c.validate();
  const auto echo = config_to_json(c);
  CHECK(config_to_json(config_from_json(echo)) == echo);
  CHECK(run_id_for(c) == run_id_for(config_from_json(echo)));
  ExperimentConfig other = c;
  other.seeds = {1};
  CHECK(run_id_for(other) != run_id_for(c));
  other = c;
  other.output = "elsewhere";
  CHECK(run_id_for(other) == run_id_for(c));
}

TEST_CASE("cells cover strategies, joint modes and seeds") {
  auto j = tiny_json();
  j["strategies"] = {"none", "er", "prospective"};
  j["regimes"] = {"task_incremental", "joint"};
  j["seeds"] = {0, 1};
  const auto cells = plan_cells(config_from_json(j));
  CHECK(cells.size() == (3 + 2) * 2);
  std::set<std::string> labels;
  for (const auto& c : cells) labels.insert(c.label() + "/" + std::to_string(c.seed));
  CHECK(labels.size() == cells.size());
  CHECK(labels.count("joint_prospective/1") == 1);
}

TEST_CASE("a two-task run covers the error matrix and is deterministic") {
  const ExperimentConfig c = config_from_json(tiny_json());
  const ExperimentResult a = run_experiment(c, 1);
  REQUIRE(a.complete());
  const auto recs = a.records();
  CHECK_NOTHROW(metrics::validate_records(recs));
  const TaskData data = build_tasks(c, 0);
  const std::string t1 = data.train[0].task.str(), t2 = data.train[1].task.str();
  auto has = [&](const std::string& metric, const std::string& task) {
    return std::any_of(recs.begin(), recs.end(), [&](const auto& r) { return r.metric == metric && r.task == task; });
  };
  CHECK(has(metric::nrmse_after(1), t1));
  CHECK(has(metric::nrmse_after(2), t1));
  CHECK(has(metric::nrmse_after(2), t2));
  CHECK(!has(metric::nrmse_after(1), t2));
  for (const auto& r : recs) {
    CHECK(r.strategy == "none");
    CHECK(r.seed == 0);
    CHECK(r.run_id == a.run_id);
  }

  const ExperimentResult b = run_experiment(c, 2);
  CHECK(metrics::records_to_csv(b.records()) == metrics::records_to_csv(recs));

  const auto report = report_json(c, a);
  CHECK(report.contains("config"));
  CHECK(report.contains("records"));
  CHECK(report.at("version") == tool_version());
  CHECK(report.at("report_schema") == 1);
  CHECK(config_to_json(config_from_json(report["config"])) == report["config"]);
}

TEST_CASE("reports are written to fresh directories") {
  const fs::path root = scratch_dir("reports");
  ExperimentConfig c = config_from_json(tiny_json());
  const ExperimentResult r = run_experiment(c, 1);
  const fs::path first = write_report(c, r, root);
  const fs::path second = write_report(c, r, root);
  CHECK(first != second);
  CHECK(fs::exists(first / "report.json"));
  CHECK(slurp(first / "metrics.csv") == slurp(second / "metrics.csv"));
  CHECK(load_records(first) == r.records());
  CHECK(load_records(first / "report.json") == r.records());
  fs::remove_all(root);
}

TEST_CASE("shift summary matches a direct correlation") {
  auto j = tiny_json();
  j["strategies"] = {"er", "prospective"};
  j["evaluation"] = {{"shift_sweep", {{"enabled", true}, {"magnitudes", {0, 0.25, 0.5, 0.75, 1.0}}}}};
  const ExperimentConfig c = config_from_json(j);
  const ExperimentResult r = run_experiment(c, 1);
  REQUIRE(r.complete());
  const ShiftSummary s = summarize_shift(c, r.records());
  REQUIRE(s.points.size() == 5);
  CHECK(s.points[0].magnitude == 0.0);
  CHECK(s.points[0].js == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(s.points[0].delta_r2) < 0.3);

  std::vector<double> x, y;
  for (const auto& p : s.points) x.push_back(p.js), y.push_back(p.delta_r2);
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i], sxx += x[i] * x[i], syy += y[i] * y[i], sxy += x[i] * y[i];
  const double r_direct = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(s.pearson.at(ShiftKind::additive_bias) == doctest::Approx(r_direct).epsilon(1e-9));
  CHECK(s.slope.at(ShiftKind::additive_bias) == doctest::Approx((n * sxy - sx * sy) / (n * sxx - sx * sx)).epsilon(1e-9));
  for (std::size_t i = 1; i < x.size(); ++i) CHECK(x[i] >= x[i - 1]);
}

TEST_CASE("compare identical reports") {
  auto recs = synthetic_records(8, 0.0);
  const auto rows = compare_records(recs, "mean_fr", Pairing::seed);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].p == 1.0);
  CHECK(rows[0].p_corrected == 1.0);
  CHECK(rows[0].stars == "ns");
  CHECK(!rows[0].note.empty());
}

TEST_CASE("compare detects a consistent winner over twenty seeds") {
  const auto rows = compare_records(synthetic_records(20, 0.05), "mean_fr", Pairing::seed);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 20);
  CHECK(rows[0].statistic == 0.0);
  CHECK(rows[0].p < 1e-4);
  CHECK(rows[0].stars == "****");
  CHECK(std::abs(rows[0].mean_difference) > 0.05);
  const std::string csv = comparisons_csv(rows);
  CHECK(csv.find("****") != std::string::npos);
}

TEST_CASE("compare applies bonferroni over all rows") {
  std::vector<metrics::MetricRecord> recs;
  for (std::uint64_t s = 0; s < 10; ++s)
    for (const std::string task : {"0", "1", "2"}) {
      recs.push_back({"r", "er", task, "fr", 0.5 + 0.01 * static_cast<double>(s), s});
      recs.push_back({"r", "prospective", task, "fr", 0.4 + 0.013 * static_cast<double>(s), s});
    }
  const auto rows = compare_records(recs, "fr", Pairing::seed);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(r.p_corrected == doctest::Approx(std::min(1.0, 3.0 * r.p)));
  const auto pooled = compare_records(recs, "fr", Pairing::seed_task);
  REQUIRE(pooled.size() == 1);
  CHECK(pooled[0].group == "all");
  CHECK(pooled[0].n == 30);
  CHECK(metrics::significance_stars(5e-3) == "**");
}

TEST_CASE("compare lists orphaned seeds") {
  auto recs = synthetic_records(6, 0.1);
  recs.push_back({"r", "er", "mean", "mean_fr", 0.3, 42});
  try {
    compare_records(recs, "mean_fr", Pairing::seed);
    FAIL("expected orphans to be reported");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
  CHECK_THROWS_AS(compare_records(recs, "no_such_metric", Pairing::seed), DataError);
  CHECK_THROWS_AS(parse_pairing("subject"), ConfigError);
}

TEST_CASE("gen-data writes every task deterministically") {
  const fs::path dir = scratch_dir("gen");
  auto j = tiny_json();
  j["suite"] = {{"kind", "embry_like"}, {"samples", 240}, {"test_samples", 120}, {"input_dim", 6}};
  j["seeds"] = {5};
  write_file(dir / "embry.json", j.dump());
  REQUIRE(tool("gen-data --config \"" + (dir / "embry.json").string() + "\" --out \"" + (dir / "a").string() + "\"") == 0);
  REQUIRE(tool("gen-data --config \"" + (dir / "embry.json").string() + "\" --out \"" + (dir / "b").string() + "\"") == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "seed-5")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto name = e.path().filename();
    CHECK(slurp(e.path()) == slurp(dir / "b" / "seed-5" / name));
    const TaskSeries s = load_csv(e.path());
    CHECK(s.size() == 240);
    CHECK(s.dim() == 6);
    CHECK(load_csv(dir / "a" / "seed-5" / "test" / name).size() == 120);
  }
  CHECK(files == 9);
  fs::remove_all(dir);
}

TEST_CASE("run writes byte-identical metrics twice") {
  const fs::path dir = scratch_dir("run");
  write_file(dir / "tiny.json", tiny_json().dump());
  const std::string cfg = "--config \"" + (dir / "tiny.json").string() + "\"";
  REQUIRE(tool("run " + cfg + " --out \"" + (dir / "one").string() + "\"") == 0);
  REQUIRE(tool("run " + cfg + " --out \"" + (dir / "two").string() + "\" --jobs 2") == 0);
  auto only_run = [](const fs::path& root) {
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(root)) runs.push_back(e.path());
    REQUIRE(runs.size() == 1);
    return runs[0];
  };
  const fs::path one = only_run(dir / "one"), two = only_run(dir / "two");
  CHECK(one.filename() == two.filename());
  CHECK(slurp(one / "metrics.csv") == slurp(two / "metrics.csv"));
  CHECK(!slurp(one / "metrics.csv").empty());

  write_file(dir / "records.csv", metrics::records_to_csv(synthetic_records(20, 0.05)));
  REQUIRE(tool("compare \"" + (dir / "records.csv").string() + "\" --metric mean_fr --pairing seed --out \"" + (dir / "cmp.csv").string() + "\"") == 0);
  CHECK(slurp(dir / "cmp.csv").find("****") != std::string::npos);
  CHECK(tool("compare \"" + (dir / "records.csv").string() + "\" --metric mean_fr --pairing subject") == 2);
  fs::remove_all(dir);
}

TEST_CASE("exit codes separate configuration from input and output failures") {
  const fs::path dir = scratch_dir("exit");
  CHECK(tool("--version") == 0);
  CHECK(tool("run --config \"" + (dir / "missing.json").string() + "\"") == 2);
  write_file(dir / "bad.json", R"({"schema": 1, "bogus": true})");
  CHECK(tool("run --config \"" + (dir / "bad.json").string() + "\"") == 2);
  write_file(dir / "broken.json", "{ not json");
  CHECK(tool("run --config \"" + (dir / "broken.json").string() + "\"") == 2);
  CHECK(tool("frobnicate") == 2);

  write_file(dir / "tiny.json", tiny_json().dump());
  write_file(dir / "blocker", "a file where a directory is needed");
  CHECK(tool("run --config \"" + (dir / "tiny.json").string() + "\" --out \"" + (dir / "blocker" / "out").string() + "\"") == 4);

  std::ostringstream series;
  series << "x\n";
  for (int i = 0; i < 800; ++i) series << std::sin(0.1 * i) << "\n";
  write_file(dir / "series.csv", series.str());
  CHECK(tool("lyapunov --input \"" + (dir / "series.csv").string() + "\" --column x") == 0);
  CHECK(tool("lyapunov --input \"" + (dir / "series.csv").string() + "\" --column y") == 2);
  fs::remove_all(dir);
}
