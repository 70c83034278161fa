#include "foresight/cli/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "foresight/data/csv.hpp"
#include "foresight/errors.hpp"
#include "foresight/log.hpp"
#include "foresight/metrics/divergence.hpp"
#include "foresight/metrics/forgetting.hpp"
#include "foresight/metrics/regression.hpp"
#include "foresight/ndkernel/random.hpp"
#include "foresight/robustness/perturb.hpp"

#ifndef FORESIGHT_VERSION
#define FORESIGHT_VERSION "0.0.0"
#endif

namespace foresight::cli {

using metrics::format_double;
using metrics::MetricRecord;
using nlohmann::json;

std::string tool_version() { return FORESIGHT_VERSION; }

namespace metric {
std::string nrmse_after(std::size_t position) { return "nrmse@" + std::to_string(position); }
std::string r2_after(std::size_t position) { return "r2@" + std::to_string(position); }
std::string shift_r2(ShiftKind kind, double m) { return "shift_r2:" + to_string(kind) + "@" + format_double(m); }
std::string shift_js(ShiftKind kind, double m) { return "shift_js:" + to_string(kind) + "@" + format_double(m); }
std::string fgsm_r2(double tau) { return "fgsm_r2@" + format_double(tau); }
std::string noise_r2(double level) { return "noise_r2@" + format_double(level); }
std::string probe_accuracy(ProbeKind kind) { return "probe_" + to_string(kind) + "_accuracy"; }
std::string probe_unchanged(ProbeKind kind) { return "probe_" + to_string(kind) + "_backbone_unchanged"; }
std::string closed_loop(std::size_t step) { return "closed_loop_deviation@" + std::to_string(step); }
}  // namespace metric

std::uint64_t model_seed(std::uint64_t seed) { return nd::derive_seed(seed, 1); }
std::uint64_t train_seed(std::uint64_t seed) { return nd::derive_seed(seed, 2); }

TaskData build_tasks(const ExperimentConfig& config, std::uint64_t seed) {
  TaskData data;
  if (config.suite.kind) {
    SuiteOptions options = config.suite.options;
    options.seed = seed;
    auto specs = make_suite(*config.suite.kind, options);
    if (!config.suite.order.empty()) {
      std::vector<TaskSpec> ordered;
      for (std::size_t p : config.suite.order) ordered.push_back(specs.at(p));
      specs = std::move(ordered);
    }
    for (const auto& spec : specs) {
      data.train.push_back(generate_task(spec));
      TaskSpec held = held_out_spec(spec);
      held.samples = config.suite.test_samples;
      data.test.push_back(generate_task(held));
    }
    return data;
  }
  std::vector<std::size_t> order = config.suite.order;
  if (order.empty())
    for (std::size_t i = 0; i < config.suite.csv.size(); ++i) order.push_back(i);
  for (std::size_t p : order) {
    const TaskId id{static_cast<std::uint32_t>(p)};
    TaskSeries series = load_csv(config.suite.csv[p], {}, id, 0.8);
    if (!config.suite.csv_test.empty()) {
      data.test.push_back(load_csv(config.suite.csv_test[p], {}, id, 0.8));
    } else {
      log::warn("suite: no held-out file for '" + config.suite.csv[p].string() +
                "'; evaluating on its validation split");
      TaskSeries test = series;
      const std::size_t d = series.dim(), begin = series.train_end, n = series.size() - begin;
      test.states = nd::Tensor({n, d}, std::vector<double>(series.states.raw() + begin * d, series.states.raw() + series.size() * d));
      test.targets.assign(series.targets.begin() + static_cast<std::ptrdiff_t>(begin), series.targets.end());
      test.trial.assign(series.trial.begin() + static_cast<std::ptrdiff_t>(begin), series.trial.end());
      test.train_end = n;
      test.latent.reset();
      data.test.push_back(std::move(test));
    }
    data.train.push_back(std::move(series));
  }
  return data;
}

std::string Cell::label() const {
  return regime == Regime::joint ? "joint_" + to_string(joint) : to_string(strategy);
}

std::vector<Cell> plan_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (auto regime : config.regimes) {
    if (regime == Regime::task_incremental) {
      for (auto s : config.strategies)
        for (auto seed : config.seeds) cells.push_back({regime, s, JointMode::original, seed});
    } else {
      for (auto m : config.joint_modes)
        for (auto seed : config.seeds) cells.push_back({regime, StrategyKind::none, m, seed});
    }
  }
  return cells;
}

namespace {

struct Recorder {
  const Cell& cell;
  std::vector<MetricRecord>& out;
  void operator()(const std::string& task, const std::string& name, double value) const {
    out.push_back({"", cell.label(), task, name, value, cell.seed});
  }
};

std::vector<std::size_t> spread(std::span<const std::size_t> all, std::size_t count) {
  if (all.size() <= count) return {all.begin(), all.end()};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(all[i * all.size() / count]);
  return out;
}

void evaluate_battery(const ExperimentConfig& config, const Cell& cell, const TaskData& data, const Predictor& predictor,
                      const MultiTaskModel* backbone_model, const std::map<TaskId, ProspectiveModel>* dynamics,
                      CellResult& result) {
  const Recorder rec{cell, result.records};
  const auto& ev = config.evaluation;
  const std::size_t T = config.backbone.window;

  std::vector<TaskWindows> clean;
  for (const auto& s : data.test) clean.push_back({s.task, make_windows(s, T, Split::all)});

  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const auto score = evaluate(predictor, clean[i].task, clean[i].windows);
    rec(clean[i].task.str(), "final_r2", score.r2);
    rec(clean[i].task.str(), "final_nrmse", score.nrmse);
  }

  if (ev.shift_sweep.enabled) {
    for (auto kind : ev.shift_sweep.kinds) {
      for (double m : ev.shift_sweep.magnitudes) {
        for (std::size_t i = 0; i < data.test.size(); ++i) {
          const TaskSeries shifted = apply_shift(data.test[i], {kind, m});
          const auto windows = make_windows(shifted, T, Split::all);
          rec(shifted.task.str(), metric::shift_r2(kind, m), evaluate(predictor, shifted.task, windows).r2);
          // Reference is the unshifted held-out series, so the zero-shift point measures exactly 0.
          rec(shifted.task.str(), metric::shift_js(kind, m), metrics::js_distance(data.test[i].states, shifted.states));
        }
      }
    }
  }
  if (ev.fgsm) {
    for (const auto& p : fgsm_curve(predictor, clean, ev.taus)) {
      rec("mean", metric::fgsm_r2(p.magnitude), p.mean_r2);
      result.curves.push_back({"fgsm", p.magnitude, p.mean_r2});
    }
  }
  if (ev.noise) {
    for (const auto& p : noise_curve(predictor, clean, ev.noise_levels, nd::derive_seed(cell.seed, 70))) {
      rec("mean", metric::noise_r2(p.magnitude), p.mean_r2);
      result.curves.push_back({"noise", p.magnitude, p.mean_r2});
    }
  }
  if (ev.probe) {
    if (!backbone_model) {
      log::info("probe: skipped for " + cell.label() + " (no single shared backbone)");
    } else {
      std::vector<Window> windows;
      std::vector<std::size_t> labels;
      for (std::size_t i = 0; i < clean.size(); ++i) {
        for (const auto& w : clean[i].windows) {
          windows.push_back(w);
          labels.push_back(i);
        }
      }
      for (auto kind : ev.probe_kinds) {
        ProbeConfig pc;
        pc.kind = kind;
        pc.epochs = ev.probe_epochs;
        pc.seed = nd::derive_seed(cell.seed, 71);
        const auto r = probe_train_eval(*backbone_model, windows, labels, pc);
        rec("mean", metric::probe_accuracy(kind), r.accuracy);
        rec("mean", metric::probe_unchanged(kind), r.backbone_unchanged ? 1.0 : 0.0);
      }
    }
  }
  if (ev.lyapunov) {
    for (std::size_t i = 0; i < clean.size(); ++i) {
      // Exponents of the predicted joint profile over the held-out windows.
      const auto pred = predict_windows(predictor, clean[i].task, clean[i].windows);
      const auto l = lyapunov_eckmann(pred, ev.embedding);
      rec(clean[i].task.str(), "lyapunov_l1", l.lambda1);
      rec(clean[i].task.str(), "lyapunov_l2", l.lambda2);
    }
  }
  if (ev.closed_loop) {
    if (!dynamics) throw UsageError("closed loop: no prospective models were trained for " + cell.label());
    const std::size_t H = ev.closed_loop_horizon;
    std::vector<ClosedLoopResult> all;
    for (const auto& s : data.test) {
      const auto it = dynamics->find(s.task);
      if (it == dynamics->end()) throw UsageError("closed loop: no prospective model for task " + s.task.str());
      const auto starts = closed_loop_starts(s, 0, s.size(), T, H);
      std::vector<ClosedLoopResult> loops;
      for (std::size_t k : spread(starts, ev.closed_loop_starts))
        loops.push_back(closed_loop_eval(predictor, s.task, it->second, s, k, T, H));
      const auto mean = mean_deviation(loops, H);
      rec(s.task.str(), metric::closed_loop(H), mean.back());
      all.insert(all.end(), loops.begin(), loops.end());
    }
    const auto mean = mean_deviation(all, H);
    for (std::size_t h = 1; h <= H; ++h) rec("mean", metric::closed_loop(h), mean[h - 1]);
    result.loops = std::move(all);
  }
}

}  // namespace

CellResult run_cell(const ExperimentConfig& config, const Cell& cell) {
  CellResult result;
  result.cell = cell;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const TaskData data = build_tasks(config, cell.seed);
    ModelConfig mc;
    mc.backbone = config.backbone;
    mc.head_hidden = config.head_hidden;
    mc.head_mode = config.head_mode;
    mc.seed = model_seed(cell.seed);
    TrainConfig tc = config.train;
    tc.seed = train_seed(cell.seed);
    ProspectiveConfig dc = config.dynamics;
    dc.state_dim = config.backbone.input_dim;
    const Recorder rec{cell, result.records};

    if (cell.regime == Regime::task_incremental) {
      StrategyConfig sc = config.strategy;
      sc.kind = cell.strategy;
      ContinualLearner learner(mc, sc, tc, dc);
      const TrainLog log = train_task_incremental(learner, data.train, data.test);
      const std::size_t n = data.train.size();
      for (const auto& [key, value] : log.nrmse.entries())
        rec(data.train[key.second - 1].task.str(), metric::nrmse_after(key.first), value);
      for (const auto& [key, value] : log.r2) rec(data.train[key.second - 1].task.str(), metric::r2_after(key.first), value);
      double fr_sum = 0.0;
      for (std::size_t t = 1; t < n; ++t) {
        const double fr = metrics::forgetting_ratio(log.nrmse, t, n);
        rec(data.train[t - 1].task.str(), "fr", fr);
        fr_sum += fr;
      }
      if (n > 1) rec("mean", "mean_fr", fr_sum / static_cast<double>(n - 1));
      for (std::size_t t = 2; t <= n; ++t) rec(data.train[t - 1].task.str(), "bwt", metrics::bwt(log.nrmse, t));
      for (const auto& tl : log.tasks) {
        rec(tl.task.str(), "epochs", static_cast<double>(tl.fit.epochs.size()));
        rec(tl.task.str(), "best_validation_mse", tl.fit.best_validation);
        if (tl.dynamics) rec(tl.task.str(), "dynamics_validation_mse", tl.dynamics->validation_mse);
        rec(tl.task.str(), "buffer_size", static_cast<double>(tl.buffer_size));
      }
      result.nrmse = log.nrmse;
      result.logs = log.tasks;
      const bool has_dynamics = !learner.dynamics().empty();
      const MultiTaskModel* backbone_model = cell.strategy == StrategyKind::pnn ? nullptr : &learner.model();
      evaluate_battery(config, cell, data, learner.predictor(), backbone_model,
                       has_dynamics ? &learner.dynamics() : nullptr, result);
    } else {
      MultiTaskModel model(mc);
      if (config.head_mode == HeadMode::task_specific)
        for (const auto& s : data.train) model.add_task_head(s.task);
      const JointResult jr = train_joint(model, data.train, cell.joint, config.strategy, tc, dc);
      rec("mean", "pretrain_epochs", static_cast<double>(jr.pretrain.epochs.size()));
      rec("mean", "finetune_epochs", static_cast<double>(jr.finetune.epochs.size()));
      rec("mean", "finetune_budget", static_cast<double>(jr.budget()));
      if (config.evaluation.closed_loop) {
        log::info("closed loop: not available for joint training cells");
      }
      ExperimentConfig local = config;
      local.evaluation.closed_loop = false;
      evaluate_battery(local, cell, data, model, &model, nullptr, result);
    }
    metrics::validate_records(result.records);
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
    log::error(cell.label() + " seed " + std::to_string(cell.seed) + ": " + e.what());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

bool ExperimentResult::complete() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

std::vector<MetricRecord> ExperimentResult::records() const {
  std::vector<MetricRecord> out;
  for (const auto& c : cells) {
    for (auto r : c.records) {
      r.run_id = run_id;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string run_id_for(const ExperimentConfig& config) {
  json j = config_to_json(config);
  j.erase("output");
  const std::string text = j.dump() + "|" + tool_version();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("run-") + std::string(buf, 12);
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  ExperimentResult result;
  result.run_id = run_id_for(config);
  const auto cells = plan_cells(config);
  result.cells.resize(cells.size());
  const auto t0 = std::chrono::steady_clock::now();
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      log::info("cell " + cells[i].label() + " seed " + std::to_string(cells[i].seed) + " started");
      result.cells[i] = run_cell(config, cells[i]);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

ShiftSummary summarize_shift(const ExperimentConfig& config, const std::vector<MetricRecord>& records) {
  const auto& sw = config.evaluation.shift_sweep;
  ShiftSummary summary;
  // (metric, task, seed) -> value, per strategy
  std::map<std::tuple<std::string, std::string, std::uint64_t>, double> conv, pros;
  for (const auto& r : records) {
    if (r.strategy == sw.conventional) conv[{r.metric, r.task, r.seed}] = r.value;
    if (r.strategy == sw.prospective) pros[{r.metric, r.task, r.seed}] = r.value;
  }
  for (auto kind : sw.kinds) {
    std::vector<double> xs, ys;
    for (double m : sw.magnitudes) {
      ShiftPoint p{kind, m, 0.0, 0.0, 0};
      const std::string r2 = metric::shift_r2(kind, m), js = metric::shift_js(kind, m);
      double js_sum = 0.0;
      std::size_t js_n = 0;
      for (const auto& [key, value] : conv) {
        if (std::get<0>(key) != r2) continue;
        const auto it = pros.find(key);
        if (it == pros.end()) continue;
        p.delta_r2 += it->second - value;
        ++p.pairs;
      }
      for (const auto* side : {&conv, &pros}) {
        for (const auto& [key, value] : *side) {
          if (std::get<0>(key) != js) continue;
          js_sum += value;
          ++js_n;
        }
      }
      if (p.pairs == 0) throw UsageError("shift sweep: no paired records for " + r2);
      p.delta_r2 /= static_cast<double>(p.pairs);
      p.js = js_sum / static_cast<double>(js_n);
      xs.push_back(p.js);
      ys.push_back(p.delta_r2);
      summary.points.push_back(p);
    }
    summary.pearson[kind] = metrics::pearson(xs, ys);
    summary.slope[kind] = metrics::ols_slope(xs, ys);
  }
  return summary;
}

namespace {

json matrix_json(const metrics::ErrorMatrix& m) {
  json rows = json::array();
  for (const auto& [key, value] : m.entries()) rows.push_back({{"trained_through", key.first}, {"task", key.second}, {"value", value}});
  return {{"kind", m.kind()}, {"tasks", m.tasks()}, {"entries", rows}};
}

std::string prov_name(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::prospective: return "prospective";
    case Provenance::noise: return "noise";
  }
  return "?";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

json report_json(const ExperimentConfig& config, const ExperimentResult& result) {
  json cells = json::array();
  for (const auto& c : result.cells) {
    json cj = {{"strategy", c.cell.label()},
               {"regime", to_string(c.cell.regime)},
               {"seed", c.cell.seed},
               {"ok", c.ok},
               {"seconds", c.seconds}};
    if (!c.ok) cj["error"] = c.error;
    if (c.nrmse) cj["nrmse"] = matrix_json(*c.nrmse);
    json tasks = json::array();
    for (const auto& t : c.logs) {
      json tj = {{"task", t.task.value},
                 {"epochs", t.fit.epochs.size()},
                 {"best_epoch", t.fit.best_epoch},
                 {"best_validation_mse", t.fit.best_validation},
                 {"early_stopped", t.fit.early_stopped},
                 {"steps", t.fit.steps},
                 {"buffer_size", t.buffer_size}};
      json counts = json::object();
      for (const auto& [p, n] : t.buffer_counts) counts[prov_name(p)] = n;
      tj["buffer_counts"] = counts;
      json usage = json::object();
      for (const auto& [p, n] : t.fit.rehearsal_usage) usage[prov_name(p)] = n;
      tj["rehearsal_usage"] = usage;
      if (t.dynamics)
        tj["dynamics"] = {{"pairs", t.dynamics->pairs},
                          {"epochs", t.dynamics->epochs},
                          {"initial_mse", t.dynamics->initial_loss},
                          {"train_mse", t.dynamics->train_loss},
                          {"validation_mse", t.dynamics->validation_mse}};
      tasks.push_back(tj);
    }
    cj["tasks"] = tasks;
    json curves = json::array();
    for (const auto& p : c.curves) curves.push_back({{"curve", p.curve}, {"magnitude", p.magnitude}, {"mean_r2", p.mean_r2}});
    cj["curves"] = curves;
    cells.push_back(cj);
  }
  json j = {{"report_schema", 1},
            {"tool", "foresight"},
            {"version", tool_version()},
            {"run_id", result.run_id},
            {"status", result.complete() ? "complete" : "partial"},
            {"wall_clock_seconds", result.wall_seconds},
            {"config", config_to_json(config)},
            {"cells", cells},
            {"records", metrics::records_to_json(result.records())}};
  if (config.evaluation.shift_sweep.enabled && result.complete()) {
    const auto s = summarize_shift(config, result.records());
    json pts = json::array();
    for (const auto& p : s.points)
      pts.push_back({{"kind", to_string(p.kind)}, {"magnitude", p.magnitude}, {"delta_r2", p.delta_r2}, {"js", p.js}, {"pairs", p.pairs}});
    json corr = json::object();
    for (const auto& [k, r] : s.pearson) corr[to_string(k)] = {{"pearson", r}, {"slope", s.slope.at(k)}};
    j["shift_sweep"] = {{"points", pts}, {"fits", corr}};
  }
  return j;
}

std::filesystem::path write_report(const ExperimentConfig& config, const ExperimentResult& result,
                                   const std::filesystem::path& out_root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec) throw IoError("cannot create output directory '" + out_root.string() + "': " + ec.message());
  fs::path dir = out_root / result.run_id;
  for (int n = 2; fs::exists(dir); ++n) dir = out_root / (result.run_id + "-" + std::to_string(n));
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  write_file(dir / "report.json", report_json(config, result).dump(2) + "\n");
  write_file(dir / "metrics.csv", metrics::records_to_csv(result.records()));

  bool any_curves = false, any_loops = false;
  std::string curves = "strategy,seed,curve,magnitude,mean_r2\n";
  for (const auto& c : result.cells) {
    for (const auto& p : c.curves) {
      any_curves = true;
      curves += c.cell.label() + "," + std::to_string(c.cell.seed) + "," + p.curve + "," + format_double(p.magnitude) +
                "," + format_double(p.mean_r2) + "\n";
    }
    if (!c.loops.empty()) {
      if (!any_loops) fs::create_directories(dir / "closed_loop");
      any_loops = true;
      write_file(dir / "closed_loop" / (c.cell.label() + "-seed" + std::to_string(c.cell.seed) + ".csv"),
                 closed_loop_csv(c.loops));
    }
  }
  if (any_curves) write_file(dir / "robustness.csv", curves);
  if (config.evaluation.shift_sweep.enabled && result.complete()) {
    const auto s = summarize_shift(config, result.records());
    std::string text = "kind,magnitude,js,delta_r2,pairs\n";
    for (const auto& p : s.points)
      text += to_string(p.kind) + "," + format_double(p.magnitude) + "," + format_double(p.js) + "," +
              format_double(p.delta_r2) + "," + std::to_string(p.pairs) + "\n";
    write_file(dir / "shift_sweep.csv", text);
  }
  return dir;
}

}  // namespace foresight::cli
