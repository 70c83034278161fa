#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "foresight/continual/config.hpp"
#include "foresight/continual/learner.hpp"
#include "foresight/data/generator.hpp"
#include "foresight/dynamics/lyapunov.hpp"
#include "foresight/models/multitask_model.hpp"
#include "foresight/models/prospective_model.hpp"
#include "foresight/robustness/probe.hpp"

namespace foresight::cli {

inline constexpr int kConfigSchema = 1;

struct SuiteConfig {
  /// Synthetic suite, or empty when `csv` lists task files.
  std::optional<SuiteKind> kind = SuiteKind::enabl3s_like;
  std::vector<std::filesystem::path> csv;  // one file per task, trained in this order
  std::vector<std::filesystem::path> csv_test;  // optional held-out file per task
  SuiteOptions options;
  std::size_t test_samples = 1000;
  /// Positions into the suite (0-based) giving the training order; empty = suite order.
  std::vector<std::size_t> order;
};

struct ShiftSweepConfig {
  bool enabled = false;
  std::vector<ShiftKind> kinds{ShiftKind::additive_bias};
  std::vector<double> magnitudes{0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0};
  std::string conventional = "er";
  std::string prospective = "prospective";
};

struct EvaluationConfig {
  ShiftSweepConfig shift_sweep;
  bool fgsm = false;
  std::vector<double> taus{0.0, 0.01, 0.02, 0.05, 0.1};
  bool noise = false;
  std::vector<double> noise_levels{0.0, 0.1, 0.2, 0.4};
  bool probe = false;
  std::vector<ProbeKind> probe_kinds{ProbeKind::linear, ProbeKind::mlp};
  std::size_t probe_epochs = 50;
  bool lyapunov = false;
  EmbeddingConfig embedding;
  bool closed_loop = false;
  std::size_t closed_loop_horizon = 20;
  std::size_t closed_loop_starts = 50;
};

enum class Regime { task_incremental, joint };
std::string to_string(Regime regime);
Regime parse_regime(const std::string& name);

struct ExperimentConfig {
  int schema = kConfigSchema;
  std::string name = "experiment";
  SuiteConfig suite;
  std::vector<Regime> regimes{Regime::task_incremental};
  std::vector<StrategyKind> strategies{StrategyKind::er};
  std::vector<JointMode> joint_modes{JointMode::original, JointMode::prospective};
  HeadMode head_mode = HeadMode::task_specific;
  BackboneConfig backbone = BackboneConfig::default_for(BackboneKind::tcn);
  std::size_t head_hidden = 32;
  std::vector<std::uint64_t> seeds{0};
  StrategyConfig strategy;  // shared settings; `kind` is replaced per cell
  TrainConfig train;        // `seed` is replaced per cell
  ProspectiveConfig dynamics;
  EvaluationConfig evaluation;
  std::filesystem::path output = "foresight-out";

  /// Throws ConfigError on any inconsistency, including unreadable CSV paths.
  void validate() const;
};

/// Unknown keys are rejected so that typos do not silently fall back to defaults.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace foresight::cli
