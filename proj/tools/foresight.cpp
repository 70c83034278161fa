// Command-line front end: config-driven experiments and the analysis helpers.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "foresight/cli/compare.hpp"
#include "foresight/cli/experiment.hpp"
#include "foresight/data/csv.hpp"
#include "foresight/errors.hpp"
#include "foresight/log.hpp"

namespace fs = std::filesystem;
using namespace foresight;

namespace {

enum Exit : int { kOk = 0, kUnexpected = 1, kConfig = 2, kRuntime = 3, kIo = 4 };

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed_offset = 0;
  std::size_t jobs = 0;
  std::string log_level = "warn";
};

std::size_t env_size(const char* name, std::size_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw ConfigError(std::string(name) + " must be a non-negative integer, got '" + v + "'");
  }
}

cli::ExperimentConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  cli::ExperimentConfig config = cli::load_config(c.config);
  for (auto& s : config.seeds) s += c.seed_offset;
  if (!c.out.empty()) {
    config.output = c.out;
  } else if (const char* env = std::getenv("FORESIGHT_OUT"); env && *env) {
    config.output = env;
  }
  config.validate();
  return config;
}

std::size_t jobs(const Common& c) {
  const std::size_t j = c.jobs ? c.jobs : env_size("FORESIGHT_JOBS", 1);
  return j == 0 ? 1 : j;
}

void set_log_level(const std::string& name) {
  if (name == "debug") log::set_level(log::Level::debug);
  else if (name == "info") log::set_level(log::Level::info);
  else if (name == "warn") log::set_level(log::Level::warn);
  else if (name == "error") log::set_level(log::Level::error);
  else if (name == "off") log::set_level(log::Level::off);
  else throw ConfigError("unknown log level '" + name + "'");
}

int finish_run(const cli::ExperimentConfig& config, const cli::ExperimentResult& result) {
  const fs::path dir = cli::write_report(config, result, config.output);
  std::cout << "report: " << (dir / "report.json").string() << "\n";
  std::cout << "cells: " << result.cells.size() << ", wall-clock " << result.wall_seconds << " s\n";
  if (!result.complete()) {
    for (const auto& c : result.cells)
      if (!c.ok) std::cerr << "failed: " << c.cell.label() << " seed " << c.cell.seed << ": " << c.error << "\n";
    std::cerr << "run aborted; the report is flagged partial\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_gen_data(const Common& c) {
  const auto config = load(c);
  const fs::path root = config.output;
  for (auto seed : config.seeds) {
    const auto data = cli::build_tasks(config, seed);
    const fs::path dir = root / ("seed-" + std::to_string(seed));
    std::error_code ec;
    fs::create_directories(dir / "test", ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    for (std::size_t i = 0; i < data.train.size(); ++i) {
      const std::string name = "task-" + data.train[i].task.str() + ".csv";
      write_csv(dir / name, data.train[i]);
      write_csv(dir / "test" / name, data.test[i]);
    }
    std::cout << dir.string() << ": " << data.train.size() << " tasks\n";
  }
  return kOk;
}

int cmd_run(const Common& c) {
  const auto config = load(c);
  return finish_run(config, cli::run_experiment(config, jobs(c)));
}

int cmd_shift_sweep(const Common& c) {
  auto config = load(c);
  config.evaluation.shift_sweep.enabled = true;
  config.validate();
  const auto result = cli::run_experiment(config, jobs(c));
  const int code = finish_run(config, result);
  if (code != kOk) return code;
  const auto s = cli::summarize_shift(config, result.records());
  std::cout << "kind,magnitude,js,delta_r2\n";
  for (const auto& p : s.points)
    std::cout << to_string(p.kind) << "," << p.magnitude << "," << p.js << "," << p.delta_r2 << "\n";
  for (const auto& [kind, r] : s.pearson)
    std::cout << to_string(kind) << ": pearson r = " << r << ", slope = " << s.slope.at(kind) << "\n";
  return kOk;
}

int cmd_robustness(const Common& c) {
  auto config = load(c);
  config.evaluation.fgsm = config.evaluation.noise = config.evaluation.probe = true;
  config.validate();
  return finish_run(config, cli::run_experiment(config, jobs(c)));
}

int cmd_closed_loop(const Common& c) {
  auto config = load(c);
  config.evaluation.closed_loop = true;
  config.train.always_train_dynamics = true;
  config.validate();
  return finish_run(config, cli::run_experiment(config, jobs(c)));
}

std::vector<double> read_column(const fs::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw DataError("'" + path.string() + "' has no column '" + column + "'");
  const std::size_t idx = static_cast<std::size_t>(it - header.begin());
  std::vector<double> values;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t i = 0; i <= idx; ++i)
      if (!std::getline(ss, cell, ',')) throw DataError(path.string() + ":" + std::to_string(n) + ": missing column");
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": '" + cell + "' is not a number");
    }
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"foresight: continual multitask learning with prospective rehearsal"};
  app.set_version_flag("--version", cli::tool_version());
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* opt = sub->add_option("--config", common.config, "experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", common.out, "output directory (overrides config and FORESIGHT_OUT)");
    sub->add_option("--seed-offset", common.seed_offset, "added to every configured seed");
    sub->add_option("--jobs", common.jobs, "parallel (strategy, seed) cells (default FORESIGHT_JOBS or 1)");
    sub->add_option("--log-level", common.log_level, "debug|info|warn|error|off");
  };

  auto* gen = app.add_subcommand("gen-data", "write the configured suite as CSV files, one per task and seed");
  add_common(gen);
  auto* run = app.add_subcommand("run", "train every (strategy, seed) cell and write a report");
  add_common(run);
  auto* sweep = app.add_subcommand("shift-sweep", "run with the shift sweep enabled and fit dR2 against JS distance");
  add_common(sweep);
  auto* robust = app.add_subcommand("robustness", "run with FGSM, noise and probe batteries enabled");
  add_common(robust);
  auto* loop = app.add_subcommand("closed-loop", "run with closed-loop evaluation through the prospective models");
  add_common(loop);

  auto* cmp = app.add_subcommand("compare", "paired Wilcoxon tests between strategies across reports");
  std::vector<std::string> reports;
  std::string metric_name, pairing = "seed", baseline, cmp_out;
  cmp->add_option("reports", reports, "report directories, metrics CSVs or report JSONs")->required();
  cmp->add_option("--metric", metric_name, "metric to compare, e.g. fr or final_r2")->required();
  cmp->add_option("--pairing", pairing, "seed (per task) or seed_task (pooled)");
  cmp->add_option("--baseline", baseline, "compare every strategy against this one");
  cmp->add_option("--out", cmp_out, "also write the table as CSV");
  cmp->add_option("--log-level", common.log_level, "debug|info|warn|error|off");

  auto* lya = app.add_subcommand("lyapunov", "Lyapunov exponents of a CSV column, or of model predictions via --config");
  std::string input, column = "target";
  EmbeddingConfig emb;
  add_common(lya, false);
  lya->add_option("--input", input, "CSV file holding the series");
  lya->add_option("--column", column, "column name (default target)");
  lya->add_option("--dimension", emb.dimension, "embedding dimension m");
  lya->add_option("--delay", emb.delay, "embedding delay");
  lya->add_option("--neighbors", emb.neighbors, "neighbours per reference point");
  lya->add_option("--radius", emb.radius, "neighbour radius in units of the series std");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    set_log_level(common.log_level);
    if (*gen) return cmd_gen_data(common);
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_shift_sweep(common);
    if (*robust) return cmd_robustness(common);
    if (*loop) return cmd_closed_loop(common);
    if (*cmp) {
      std::vector<metrics::MetricRecord> records;
      for (const auto& r : reports) {
        auto more = cli::load_records(r);
        records.insert(records.end(), more.begin(), more.end());
      }
      const auto rows = cli::compare_records(records, metric_name, cli::parse_pairing(pairing),
                                             baseline.empty() ? std::nullopt : std::optional<std::string>(baseline));
      const std::string text = cli::comparisons_csv(rows);
      std::cout << text;
      if (!cmp_out.empty()) {
        std::ofstream out(cmp_out);
        if (!(out << text)) throw IoError("cannot write '" + cmp_out + "'");
      }
      return kOk;
    }
    if (*lya) {
      if (!input.empty()) {
        const auto series = read_column(input, column);
        const auto r = lyapunov_eckmann(series, emb);
        std::cout << "lambda1," << metrics::format_double(r.lambda1) << "\nlambda2," << metrics::format_double(r.lambda2)
                  << "\nreference_points," << r.reference_points << "\ninsufficient," << r.insufficient << "\n";
        return kOk;
      }
      auto config = load(common);
      config.evaluation.lyapunov = true;
      config.validate();
      return finish_run(config, cli::run_experiment(config, jobs(common)));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kUnexpected;
  }
  return kUnexpected;
}
