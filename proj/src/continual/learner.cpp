#include "foresight/continual/learner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"
#include "foresight/metrics/regression.hpp"
#include "foresight/ndkernel/ops.hpp"
#include "foresight/ndkernel/sgd.hpp"

namespace foresight {

namespace ops = nd::ops;

namespace {

struct Sample {
  TaskId task;
  const Window* window = nullptr;
  Provenance provenance = Provenance::original;
};

struct FitInput {
  std::vector<Sample> primary;
  std::map<TaskId, std::vector<Sample>> rehearsal;
  std::vector<std::pair<TaskId, std::span<const Window>>> validation;
};

struct FitHooks {
  std::function<void(const ParamRefs&, GradList&)> adjust;
  std::function<void(const ParamRefs&, const GradList&, const std::vector<nd::Tensor>&)> observe;
};

nd::Var squared_error(const Predictor& model, Binding& bind, TaskId task, std::span<const Window* const> windows) {
  std::vector<double> y;
  y.reserve(windows.size());
  for (const Window* w : windows) y.push_back(w->target);
  nd::Var pred = model.forward(bind, task, bind.tape().constant(stack_windows(windows)));
  return ops::sum_squared_error(pred, nd::Tensor::vector(std::move(y)));
}

nd::Var batch_loss(const Predictor& model, Binding& bind, std::span<const Sample> samples) {
  std::map<TaskId, std::vector<const Window*>> groups;
  for (const auto& s : samples) groups[s.task].push_back(s.window);
  std::optional<nd::Var> total;
  for (const auto& [task, ws] : groups) {
    nd::Var l = squared_error(model, bind, task, ws);
    total = total ? ops::add(*total, l) : l;
  }
  return *total;
}

GradList gradients_of(const ParamRefs& params, const Binding& bind, const nd::Gradients& grads) {
  GradList out(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (const nd::Tensor* g = bind.gradient(grads, *params[k].tensor)) out[k] = *g;
  }
  return out;
}

std::vector<const nd::Tensor*> grad_pointers(const GradList& grads) {
  std::vector<const nd::Tensor*> out(grads.size(), nullptr);
  for (std::size_t k = 0; k < grads.size(); ++k)
    if (!grads[k].empty()) out[k] = &grads[k];
  return out;
}

double validation_loss(const Predictor& model, const std::vector<std::pair<TaskId, std::span<const Window>>>& sets) {
  double acc = 0.0;
  for (const auto& [task, windows] : sets) acc += evaluate(model, task, windows).mse;
  return acc / static_cast<double>(sets.size());
}

FitSummary fit(const Predictor& model, const ParamRefs& params, const FitInput& in, const TrainConfig& cfg, nd::Rng& rng,
               const FitHooks& hooks = {}) {
  if (in.primary.empty()) throw DataError("training: empty training split");
  if (in.validation.empty()) throw UsageError("training: no validation windows to monitor");
  FitSummary summary;
  nd::SgdState opt(cfg.learning_rate, cfg.momentum);
  std::vector<nd::Tensor*> ptrs;
  for (const auto& p : params) ptrs.push_back(p.tensor);
  ParamSnapshot best = snapshot(params);

  std::vector<TaskId> rtasks;
  for (const auto& [t, pool] : in.rehearsal)
    if (!pool.empty()) rtasks.push_back(t);
  struct Cursor {
    std::vector<std::size_t> order;
    std::size_t pos = 0;
  };
  std::map<TaskId, Cursor> cursors;
  auto draw = [&](TaskId t, std::size_t n, std::vector<Sample>& out) {
    const auto& pool = in.rehearsal.at(t);
    Cursor& c = cursors[t];
    for (std::size_t i = 0; i < n; ++i) {
      if (c.pos == c.order.size()) {
        c.order = nd::permutation(rng, pool.size());
        c.pos = 0;
      }
      out.push_back(pool[c.order[c.pos++]]);
    }
  };
  std::size_t rotation = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = nd::permutation(rng, in.primary.size());
    double sse = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<Sample> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(in.primary[order[i]]);
      std::vector<Sample> rehearsal;
      if (!rtasks.empty() && cfg.rehearsal_batch > 0) {
        const std::size_t m = rtasks.size(), base = cfg.rehearsal_batch / m, extra = cfg.rehearsal_batch % m;
        for (std::size_t j = 0; j < m; ++j) draw(rtasks[j], base + ((j + m - rotation % m) % m < extra ? 1 : 0), rehearsal);
        ++rotation;
      }

      nd::Tape tape;
      Binding bind(tape);
      nd::Var primary = batch_loss(model, bind, batch);
      sse += primary.value().item();
      nd::Var loss = primary;
      if (!rehearsal.empty()) {
        loss = ops::add(primary, batch_loss(model, bind, rehearsal));
        for (const auto& r : rehearsal) ++summary.rehearsal_usage[r.provenance];
      }
      const nd::Gradients grads = tape.backward(loss);
      GradList g = gradients_of(params, bind, grads);

      std::vector<nd::Tensor> before;
      GradList data;
      if (hooks.observe) {
        for (const auto& p : params) before.push_back(*p.tensor);
        data = g;
      }
      if (hooks.adjust) hooks.adjust(params, g);
      nd::sgd_step(ptrs, grad_pointers(g), opt);
      if (hooks.observe) hooks.observe(params, data, before);
      ++summary.steps;
    }

    const double val = validation_loss(model, in.validation);
    summary.epochs.push_back({epoch, sse / static_cast<double>(in.primary.size()), val});
    log::debug("epoch " + std::to_string(epoch) + " train " + std::to_string(summary.epochs.back().train_loss) +
               " val " + std::to_string(val));
    if (val < summary.best_validation) {
      summary.best_validation = val;
      summary.best_epoch = epoch;
      summary.patience_counter = 0;
      best = snapshot(params);
    } else if (++summary.patience_counter >= cfg.patience) {
      summary.early_stopped = true;
      break;
    }
  }
  restore(params, best);
  return summary;
}

std::vector<Sample> samples_of(TaskId task, std::span<const Window> windows) {
  std::vector<Sample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back({task, &w, Provenance::original});
  return out;
}

}  // namespace

TaskScore evaluate(const Predictor& model, TaskId task, std::span<const Window> windows) {
  if (windows.empty()) throw DataError("evaluate: no windows for task " + task.str());
  const auto pred = predict_windows(model, task, windows);
  const auto truth = targets_of(windows);
  TaskScore s;
  s.mse = metrics::mean_squared_error(truth, pred);
  s.r2 = metrics::r_squared(truth, pred);
  s.nrmse = metrics::nrmse(truth, pred);
  return s;
}

Transitions transitions(const TaskSeries& series, std::size_t begin, std::size_t end) {
  end = std::min(end, series.size());
  const std::size_t d = series.dim();
  std::vector<std::size_t> ks;
  for (std::size_t k = begin; k + 1 < end; ++k)
    if (series.trial[k] == series.trial[k + 1]) ks.push_back(k);
  Transitions t;
  t.states = nd::Tensor(nd::Shape{ks.size(), d});
  t.next = nd::Tensor(nd::Shape{ks.size(), d});
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::copy_n(series.states.raw() + ks[i] * d, d, t.states.raw() + i * d);
    std::copy_n(series.states.raw() + (ks[i] + 1) * d, d, t.next.raw() + i * d);
    t.outputs.push_back(series.targets[ks[i]]);
  }
  return t;
}

double dynamics_mse(const ProspectiveModel& g, const Transitions& pairs) {
  if (pairs.size() == 0) throw DataError("dynamics_mse: no transitions");
  const nd::Tensor pred = g.prospect_batch(pairs.states, pairs.outputs);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - pairs.next[i]) * (pred[i] - pairs.next[i]);
  return acc / static_cast<double>(pred.size());
}

DynamicsFit train_prospective(ProspectiveModel& g, const Transitions& train, const Transitions& validation,
                              const TrainConfig& cfg, std::uint64_t seed) {
  if (train.size() == 0) throw DataError("train_prospective: no consecutive same-trial pairs in the training split");
  if (train.states.dim(1) != g.state_dim()) throw ShapeError("train_prospective: state dim differs from the model");
  const Transitions& monitor = validation.size() > 0 ? validation : train;
  const nd::Tensor inputs = prospective_inputs(train.states, train.outputs);
  const std::size_t n = train.size(), d = g.state_dim();

  DynamicsFit fit;
  fit.pairs = n;
  fit.initial_loss = dynamics_mse(g, train);
  ParamRefs params = g.parameters();
  std::vector<nd::Tensor*> ptrs;
  for (const auto& p : params) ptrs.push_back(p.tensor);
  nd::SgdState opt(cfg.dynamics_learning_rate, cfg.momentum);
  nd::Rng rng(seed);
  ParamSnapshot best = snapshot(params);
  double best_val = dynamics_mse(g, monitor);
  std::size_t bad = 0;

  for (std::size_t epoch = 1; epoch <= cfg.dynamics_epochs; ++epoch) {
    fit.epochs = epoch;
    const auto order = nd::permutation(rng, n);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t B = std::min(cfg.batch_size, n - start);
      nd::Tensor x(nd::Shape{B, d + 1}), target(nd::Shape{B, d});
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t r = order[start + b];
        for (std::size_t j = 0; j <= d; ++j) x[b * (d + 1) + j] = inputs[r * (d + 1) + j];
        for (std::size_t j = 0; j < d; ++j) target[b * d + j] = train.next[r * d + j];
      }
      nd::Tape tape;
      Binding bind(tape);
      nd::Var pred = g.forward(bind, tape.constant(std::move(x)));
      nd::Var loss = ops::sum(ops::square(ops::sub(pred, tape.constant(std::move(target)))));
      const nd::Gradients grads = tape.backward(loss);
      GradList gl = gradients_of(params, bind, grads);
      nd::sgd_step(ptrs, grad_pointers(gl), opt);
    }
    const double val = dynamics_mse(g, monitor);
    if (val < best_val) {
      best_val = val;
      best = snapshot(params);
      bad = 0;
    } else if (++bad >= cfg.patience) {
      break;
    }
  }
  restore(params, best);
  fit.train_loss = dynamics_mse(g, train);
  fit.validation_mse = dynamics_mse(g, monitor);
  return fit;
}

DynamicsFit train_prospective(ProspectiveModel& g, const TaskSeries& series, const TrainConfig& config, std::uint64_t seed) {
  return train_prospective(g, transitions(series, 0, series.train_end), transitions(series, series.train_end, series.size()),
                           config, seed);
}

std::vector<std::size_t> rehearsal_candidates(const TaskSeries& series, std::size_t window, std::size_t horizon) {
  std::vector<std::size_t> out;
  const std::size_t span = window + horizon;  // rows k-horizon-T+1 .. k
  for (std::size_t k = series.train_end + span - 1; k < series.size(); ++k) {
    if (series.trial[k + 1 - span] == series.trial[k]) out.push_back(k);
  }
  return out;
}

std::vector<BufferEntry> original_entries(const TaskSeries& series, std::span<const std::size_t> steps, std::size_t window) {
  std::vector<BufferEntry> out;
  out.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::size_t k = steps[i];
    out.push_back({Window{window_at(series, k, window), series.targets[k], series.task, k}, Provenance::original, i});
  }
  return out;
}

std::vector<BufferEntry> build_prospective_rehearsal(const Predictor& model, const ProspectiveModel& g,
                                                     const TaskSeries& series, std::span<const std::size_t> steps,
                                                     std::size_t window, std::size_t horizon) {
  if (horizon < 1) throw ConfigError("prospective rehearsal: horizon must be >= 1");
  if (g.state_dim() != series.dim()) throw ShapeError("prospective rehearsal: g state dim differs from the series");
  const std::size_t d = series.dim();
  std::vector<Window> imagined;
  imagined.reserve(steps.size());
  for (std::size_t k : steps) {
    if (k < horizon + window - 1 || series.trial[k + 1 - horizon - window] != series.trial[k]) {
      throw UsageError("prospective rehearsal: step " + std::to_string(k) + " lacks " + std::to_string(horizon) +
                       " steps of context in its trial");
    }
    imagined.push_back(Window{window_at(series, k - horizon, window), series.targets[k], series.task, k - horizon});
  }
  for (std::size_t h = 0; h < horizon && !imagined.empty(); ++h) {
    const auto y_hat = predict_windows(model, series.task, imagined);
    nd::Tensor last(nd::Shape{imagined.size(), d});
    for (std::size_t i = 0; i < imagined.size(); ++i)
      std::copy_n(imagined[i].inputs.raw() + (window - 1) * d, d, last.raw() + i * d);
    const nd::Tensor next = g.prospect_batch(last, y_hat);
    for (std::size_t i = 0; i < imagined.size(); ++i) {
      double* rows = imagined[i].inputs.raw();
      std::copy(rows + d, rows + window * d, rows);
      std::copy_n(next.raw() + i * d, d, rows + (window - 1) * d);
      ++imagined[i].step;
    }
  }
  std::vector<BufferEntry> out;
  out.reserve(2 * steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::size_t k = steps[i];
    out.push_back({Window{window_at(series, k, window), series.targets[k], series.task, k}, Provenance::original, i});
    imagined[i].target = series.targets[k];
    out.push_back({std::move(imagined[i]), Provenance::prospective, i});
  }
  return out;
}

std::vector<BufferEntry> noise_augment(std::span<const BufferEntry> entries, double level, nd::Rng& rng) {
  if (!(level >= 0.0)) throw ConfigError("noise_augment: level must be >= 0");
  std::vector<BufferEntry> out;
  if (entries.empty()) return out;
  const std::size_t d = entries.front().window.inputs.dim(1);
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  std::size_t rows = 0;
  for (const auto& e : entries) {
    const auto& x = e.window.inputs;
    for (std::size_t r = 0; r < x.dim(0); ++r, ++rows)
      for (std::size_t f = 0; f < d; ++f) mean[f] += x.at(r, f);
  }
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (const auto& e : entries) {
    const auto& x = e.window.inputs;
    for (std::size_t r = 0; r < x.dim(0); ++r)
      for (std::size_t f = 0; f < d; ++f) sq[f] += (x.at(r, f) - mean[f]) * (x.at(r, f) - mean[f]);
  }
  std::vector<double> sigma(d);
  for (std::size_t f = 0; f < d; ++f) sigma[f] = level * std::sqrt(sq[f] / static_cast<double>(rows));

  out.reserve(entries.size());
  for (const auto& e : entries) {
    BufferEntry copy = e;
    copy.provenance = Provenance::noise;
    if (level > 0.0) {
      auto& x = copy.window.inputs;
      for (std::size_t r = 0; r < x.dim(0); ++r)
        for (std::size_t f = 0; f < d; ++f) x.at(r, f) += nd::normal(rng, 0.0, sigma[f]);
    }
    out.push_back(std::move(copy));
  }
  return out;
}

ContinualLearner::ContinualLearner(ModelConfig model, StrategyConfig strategy, TrainConfig train, ProspectiveConfig dynamics)
    : model_(model), strategy_(strategy), train_(train), dynamics_config_(dynamics), buffer_(strategy.capacity) {
  strategy_.validate();
  train_.validate();
  if (strategy_.kind == StrategyKind::pnn) pnn_.emplace(model);
  if (strategy_.kind == StrategyKind::ewc) ewc_.emplace(strategy_.lambda());
  if (strategy_.kind == StrategyKind::si) si_.emplace(strategy_.lambda(), strategy_.si_xi);
}

const Predictor& ContinualLearner::predictor() const {
  if (pnn_) return *pnn_;
  return model_;
}

const PnnModel& ContinualLearner::pnn() const {
  if (!pnn_) throw UsageError("learner: not a pnn strategy");
  return *pnn_;
}

ParamRefs ContinualLearner::trainable(TaskId task) {
  if (pnn_) return pnn_->column_parameters(task);
  return model_.parameters();
}

TaskTrainLog ContinualLearner::learn(const TaskSeries& series) {
  series.validate();
  const TaskId task = series.task;
  if (seen_.count(task)) throw UsageError("learner: task " + task.str() + " was already learned");
  if (series.dim() != model_.config().backbone.input_dim) {
    throw ShapeError("learner: task " + task.str() + " has " + std::to_string(series.dim()) + " features, model expects " +
                     std::to_string(model_.config().backbone.input_dim));
  }
  const std::size_t T = window();
  const std::vector<Window> train_w = make_windows(series, T, Split::train);
  if (train_w.empty()) throw DataError("learner: task " + task.str() + " has an empty training split");
  std::vector<Window> val_w = make_windows(series, T, Split::validation);
  if (val_w.empty()) {
    log::warn("learner: task " + task.str() + " has no validation windows, monitoring the training split");
    val_w = train_w;
  }

  if (pnn_) {
    pnn_->add_column(task);
  } else if (model_.config().head_mode == HeadMode::task_specific) {
    model_.add_task_head(task);
  }
  const ParamRefs params = trainable(task);
  nd::Rng rng(nd::derive_seed(train_.seed, 30, task.value));

  FitInput in;
  in.primary = samples_of(task, train_w);
  if (strategy_.uses_buffer()) {
    for (TaskId t : buffer_.tasks())
      for (const auto& e : buffer_.entries(t)) in.rehearsal[t].push_back({t, &e.window, e.provenance});
  }
  in.validation.emplace_back(task, val_w);

  FitHooks hooks;
  std::map<TaskId, std::vector<const Window*>> memory;
  switch (strategy_.kind) {
    case StrategyKind::ewc:
      if (ewc_->task_count() > 0) hooks.adjust = [this](const ParamRefs& p, GradList& g) { ewc_->add_gradient(p, g); };
      break;
    case StrategyKind::si:
      si_->begin_task(params);
      hooks.adjust = [this](const ParamRefs& p, GradList& g) { si_->add_gradient(p, g); };
      hooks.observe = [this](const ParamRefs& p, const GradList& g, const std::vector<nd::Tensor>& before) {
        si_->observe(p, g, before);
      };
      break;
    case StrategyKind::gem:
      for (const auto& [t, ws] : gem_memory_)
        for (const auto& w : ws) memory[t].push_back(&w);
      if (!memory.empty()) {
        hooks.adjust = [this, &memory](const ParamRefs& p, GradList& g) {
          std::vector<std::vector<double>> mem;
          for (const auto& [t, ws] : memory) {
            nd::Tape tape;
            Binding bind(tape);
            const nd::Gradients mg = tape.backward(squared_error(predictor(), bind, t, ws));
            mem.push_back(flatten(p, gradients_of(p, bind, mg)));
          }
          const GemProjection proj = gem_project(flatten(p, g), mem);
          if (proj.projected) unflatten(proj.gradient, p, g);
        };
      }
      break;
    default:
      break;
  }

  TaskTrainLog entry;
  entry.task = task;
  entry.fit = fit(predictor(), params, in, train_, rng, hooks);

  switch (strategy_.kind) {
    case StrategyKind::ewc: {
      const auto idx = reservoir_select(train_w.size(), strategy_.fisher_samples, nd::derive_seed(train_.seed, 50, task.value));
      ParamSnapshot fisher;
      for (const auto& p : params) fisher.emplace(p.name, nd::Tensor(p.tensor->shape()));
      for (std::size_t i : idx) {
        nd::Tape tape;
        Binding bind(tape);
        const Window* w = &train_w[i];
        const nd::Gradients grads = tape.backward(squared_error(predictor(), bind, task, std::span(&w, 1)));
        for (const auto& p : params) {
          if (const nd::Tensor* g = bind.gradient(grads, *p.tensor)) {
            auto& f = fisher.at(p.name);
            for (std::size_t j = 0; j < f.size(); ++j) f[j] += (*g)[j] * (*g)[j];
          }
        }
      }
      for (auto& [name, f] : fisher)
        for (auto& v : f.data()) v /= static_cast<double>(idx.size());
      ewc_->add_task(snapshot(params), std::move(fisher));
      break;
    }
    case StrategyKind::si:
      si_->end_task(params);
      break;
    case StrategyKind::gem: {
      std::vector<Window> kept;
      for (std::size_t i : reservoir_select(train_w.size(), strategy_.gem_memory, nd::derive_seed(train_.seed, 51, task.value)))
        kept.push_back(train_w[i]);
      gem_memory_[task] = std::move(kept);
      break;
    }
    default:
      break;
  }

  seen_.emplace(task, series);
  order_.push_back(task);

  if (strategy_.kind == StrategyKind::prospective || train_.always_train_dynamics) {
    ProspectiveConfig gc = dynamics_config_;
    gc.state_dim = series.dim();
    gc.seed = nd::derive_seed(nd::derive_seed(train_.seed, 20, task.value), dynamics_config_.seed);
    ProspectiveModel g(gc);
    entry.dynamics = train_prospective(g, series, train_, nd::derive_seed(train_.seed, 21, task.value));
    dynamics_.insert_or_assign(task, std::move(g));
  }

  refresh_buffer();
  entry.buffer_size = buffer_.size();
  for (auto p : {Provenance::original, Provenance::prospective, Provenance::noise}) entry.buffer_counts[p] = buffer_.count(p);
  return entry;
}

void ContinualLearner::refresh_buffer() {
  if (!strategy_.uses_buffer()) return;
  const std::size_t T = window(), H = strategy_.imagination_horizon;
  std::map<TaskId, std::vector<std::size_t>> candidates;
  std::size_t fewest = SIZE_MAX;
  for (TaskId t : order_) {
    candidates[t] = rehearsal_candidates(seen_.at(t), T, H);
    fewest = std::min(fewest, candidates[t].size());
  }
  const std::size_t quota = std::min(buffer_.quota(order_.size()), fewest - fewest % 2);
  if (quota == 0) log::warn("rehearsal: no validation windows with enough context, buffer left empty");

  buffer_.clear();
  for (TaskId t : order_) {
    const TaskSeries& series = seen_.at(t);
    const std::size_t picks = strategy_.kind == StrategyKind::er ? quota : quota / 2;
    std::vector<std::size_t> steps;
    for (std::size_t i : reservoir_select(candidates[t].size(), picks, nd::derive_seed(train_.seed, 40, t.value)))
      steps.push_back(candidates[t][i]);

    std::vector<BufferEntry> entries;
    if (strategy_.kind == StrategyKind::er) {
      entries = original_entries(series, steps, T);
    } else if (strategy_.kind == StrategyKind::prospective) {
      entries = build_prospective_rehearsal(predictor(), dynamics_.at(t), series, steps, T, H);
    } else {
      nd::Rng rng(nd::derive_seed(nd::derive_seed(train_.seed, 41, t.value), order_.size()));
      const auto originals = original_entries(series, steps, T);
      const auto noisy = noise_augment(originals, strategy_.noise_level, rng);
      for (std::size_t i = 0; i < originals.size(); ++i) {
        entries.push_back(originals[i]);
        entries.push_back(noisy[i]);
      }
    }
    buffer_.set_task(t, std::move(entries));
  }
}

TrainLog train_task_incremental(ContinualLearner& learner, std::span<const TaskSeries> tasks,
                                std::span<const TaskSeries> tests) {
  if (tasks.size() != tests.size()) throw UsageError("train_task_incremental: one test series per task is required");
  const std::size_t T = learner.window();
  std::vector<std::vector<Window>> test_windows;
  for (std::size_t j = 0; j < tests.size(); ++j) {
    if (tests[j].task != tasks[j].task) throw UsageError("train_task_incremental: test series " + std::to_string(j) + " belongs to another task");
    test_windows.push_back(make_windows(tests[j], T, Split::all));
  }
  TrainLog log;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    log::info("learning task " + tasks[i].task.str() + " (" + std::to_string(i + 1) + "/" + std::to_string(tasks.size()) + ")");
    log.tasks.push_back(learner.learn(tasks[i]));
    for (std::size_t j = 0; j <= i; ++j) {
      const TaskScore s = evaluate(learner.predictor(), tasks[j].task, test_windows[j]);
      log.nrmse.set(i + 1, j + 1, s.nrmse);
      log.r2[{i + 1, j + 1}] = s.r2;
    }
  }
  return log;
}

std::string to_string(JointMode mode) { return mode == JointMode::original ? "original" : "prospective"; }

JointMode parse_joint_mode(const std::string& name) {
  if (name == "original") return JointMode::original;
  if (name == "prospective") return JointMode::prospective;
  throw ConfigError("unknown joint mode '" + name + "' (expected original or prospective)");
}

JointResult train_joint(MultiTaskModel& model, std::span<const TaskSeries> tasks, JointMode mode,
                        const StrategyConfig& strategy, const TrainConfig& train, ProspectiveConfig dynamics) {
  if (tasks.empty()) throw UsageError("train_joint: no tasks");
  strategy.validate();
  train.validate();
  const std::size_t T = model.config().backbone.window, H = strategy.imagination_horizon;
  std::vector<std::vector<Window>> train_w, val_w;
  for (const auto& s : tasks) {
    s.validate();
    if (model.config().head_mode == HeadMode::task_specific && !model.has_task(s.task)) model.add_task_head(s.task);
    train_w.push_back(make_windows(s, T, Split::train));
    val_w.push_back(make_windows(s, T, Split::validation));
    if (train_w.back().empty()) throw DataError("train_joint: task " + s.task.str() + " has an empty training split");
    if (val_w.back().empty()) val_w.back() = train_w.back();
  }
  JointResult result;
  const ParamRefs params = model.parameters();
  nd::Rng rng(nd::derive_seed(train.seed, 60));

  FitInput base;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto s = samples_of(tasks[i].task, train_w[i]);
    base.primary.insert(base.primary.end(), s.begin(), s.end());
    base.validation.emplace_back(tasks[i].task, val_w[i]);
  }
  result.training_windows = base.primary.size();
  result.pretrain = fit(model, params, base, train, rng);

  std::size_t fewest = SIZE_MAX;
  std::vector<std::vector<std::size_t>> candidates;
  for (const auto& s : tasks) {
    candidates.push_back(rehearsal_candidates(s, T, H));
    fewest = std::min(fewest, candidates.back().size());
  }
  const std::size_t quota = std::min(RehearsalBuffer(strategy.capacity).quota(tasks.size()), fewest - fewest % 2);

  std::vector<std::vector<BufferEntry>> augmentation;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TaskSeries& s = tasks[i];
    const std::size_t picks = mode == JointMode::original ? quota : quota / 2;
    std::vector<std::size_t> steps;
    for (std::size_t j : reservoir_select(candidates[i].size(), picks, nd::derive_seed(train.seed, 40, s.task.value)))
      steps.push_back(candidates[i][j]);
    if (mode == JointMode::original) {
      augmentation.push_back(original_entries(s, steps, T));
    } else {
      ProspectiveConfig gc = dynamics;
      gc.state_dim = s.dim();
      gc.seed = nd::derive_seed(nd::derive_seed(train.seed, 20, s.task.value), dynamics.seed);
      ProspectiveModel g(gc);
      result.dynamics[s.task] = train_prospective(g, s, train, nd::derive_seed(train.seed, 21, s.task.value));
      augmentation.push_back(build_prospective_rehearsal(model, g, s, steps, T, H));
    }
    result.augmentation += augmentation.back().size();
  }

  FitInput tuned = base;
  for (const auto& entries : augmentation)
    for (const auto& e : entries) tuned.primary.push_back({e.window.task, &e.window, e.provenance});
  result.finetune = fit(model, params, tuned, train, rng);
  return result;
}

}  // namespace foresight
