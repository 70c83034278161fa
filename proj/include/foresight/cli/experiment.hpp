#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "foresight/cli/experiment_config.hpp"
#include "foresight/dynamics/rollout.hpp"
#include "foresight/metrics/records.hpp"

namespace foresight::cli {

std::string tool_version();

/// Training and held-out series for every task of one seed, in training order.
struct TaskData {
  std::vector<TaskSeries> train;
  std::vector<TaskSeries> test;
};
TaskData build_tasks(const ExperimentConfig& config, std::uint64_t seed);

/// One independent unit of work: a strategy (or joint mode) under one seed.
struct Cell {
  Regime regime = Regime::task_incremental;
  StrategyKind strategy = StrategyKind::none;
  JointMode joint = JointMode::original;
  std::uint64_t seed = 0;
  /// Strategy column of the records: the strategy name, or joint_<mode>.
  std::string label() const;
};
std::vector<Cell> plan_cells(const ExperimentConfig& config);

std::uint64_t model_seed(std::uint64_t seed);
std::uint64_t train_seed(std::uint64_t seed);

struct CurvePoint {
  std::string curve;  // fgsm | noise
  double magnitude = 0.0;
  double mean_r2 = 0.0;
};

struct CellResult {
  Cell cell;
  bool ok = false;
  std::string error;
  std::vector<metrics::MetricRecord> records;  // run_id left empty
  std::optional<metrics::ErrorMatrix> nrmse;
  std::vector<TaskTrainLog> logs;
  std::vector<CurvePoint> curves;
  std::vector<ClosedLoopResult> loops;
  double seconds = 0.0;
};

CellResult run_cell(const ExperimentConfig& config, const Cell& cell);

struct ShiftPoint {
  ShiftKind kind = ShiftKind::additive_bias;
  double magnitude = 0.0;
  double delta_r2 = 0.0;  // prospective - conventional, mean over seeds and tasks
  double js = 0.0;        // mean over seeds and tasks
  std::size_t pairs = 0;
};

struct ShiftSummary {
  std::vector<ShiftPoint> points;
  std::map<ShiftKind, double> pearson;
  std::map<ShiftKind, double> slope;
};

/// Pairs conventional and prospective shift records by (seed, task) at every sweep point.
ShiftSummary summarize_shift(const ExperimentConfig& config, const std::vector<metrics::MetricRecord>& records);

struct ExperimentResult {
  std::string run_id;
  std::vector<CellResult> cells;
  double wall_seconds = 0.0;
  bool complete() const;
  /// Records of every cell (failed cells contribute what they produced), run_id filled in.
  std::vector<metrics::MetricRecord> records() const;
};

/// Stable id derived from the config echo and tool version.
std::string run_id_for(const ExperimentConfig& config);

/// Runs all cells, `jobs` at a time. Cells never share mutable state.
ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

nlohmann::json report_json(const ExperimentConfig& config, const ExperimentResult& result);

/// Creates a fresh directory under config.output (never overwrites) and writes report.json,
/// metrics.csv and the curve/trajectory CSVs. Returns the directory.
std::filesystem::path write_report(const ExperimentConfig& config, const ExperimentResult& result,
                                   const std::filesystem::path& out_root);

/// Metric names used in the records.
namespace metric {
std::string nrmse_after(std::size_t position);
std::string r2_after(std::size_t position);
std::string shift_r2(ShiftKind kind, double magnitude);
std::string shift_js(ShiftKind kind, double magnitude);
std::string fgsm_r2(double tau);
std::string noise_r2(double level);
std::string probe_accuracy(ProbeKind kind);
std::string probe_unchanged(ProbeKind kind);
std::string closed_loop(std::size_t step);
}  // namespace metric

}  // namespace foresight::cli
