#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <numeric>
#include <cmath>
#include <random>
#include <set>

#include "foresight/continual/buffer.hpp"
#include "foresight/continual/config.hpp"
#include "foresight/continual/learner.hpp"
#include "foresight/continual/pnn.hpp"
#include "foresight/continual/regularizers.hpp"
#include "foresight/data/generator.hpp"
#include "foresight/errors.hpp"

using namespace foresight;

namespace {

TaskSpec small_task(std::uint32_t id, double speed, double incline, std::size_t samples = 400, double noise = 0.03) {
  TaskSpec s;
  s.id = TaskId{id};
  s.speed = speed;
  s.incline = incline;
  s.input_dim = 4;
  s.samples = samples;
  s.noise = noise;
  s.trials = 2;
  s.seed = 100 + id;
  s.sample_seed = 200 + id;
  return s;
}

std::vector<TaskSeries> small_suite(std::size_t n, std::size_t samples = 400) {
  const double speeds[] = {0.8, 1.2, 0.6, 1.0};
  const double inclines[] = {0.0, 1.0, -1.0, 0.5};
  std::vector<TaskSeries> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_task(small_task(static_cast<std::uint32_t>(i), speeds[i], inclines[i], samples)));
  return out;
}

std::vector<TaskSeries> tests_for(const std::vector<TaskSeries>& tasks, std::size_t samples = 400) {
  const double speeds[] = {0.8, 1.2, 0.6, 1.0};
  const double inclines[] = {0.0, 1.0, -1.0, 0.5};
  std::vector<TaskSeries> out;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    out.push_back(generate_task(held_out_spec(small_task(static_cast<std::uint32_t>(i), speeds[i], inclines[i], samples))));
  return out;
}

ModelConfig small_model(BackboneKind kind = BackboneKind::mlp, HeadMode mode = HeadMode::task_specific) {
  ModelConfig mc;
  mc.backbone = BackboneConfig::default_for(kind, 4, 6);
  mc.head_hidden = 8;
  mc.head_mode = mode;
  mc.seed = 7;
  return mc;
}

TrainConfig quick_train(std::size_t epochs = 3) {
  TrainConfig tc;
  tc.batch_size = 32;
  tc.rehearsal_batch = 32;
  tc.learning_rate = 1e-3;
  tc.max_epochs = epochs;
  tc.dynamics_epochs = epochs;
  tc.dynamics_learning_rate = 1e-3;
  tc.seed = 3;
  return tc;
}

StrategyConfig strategy(StrategyKind kind, std::size_t capacity = 120) {
  StrategyConfig s;
  s.kind = kind;
  s.capacity = capacity;
  s.fisher_samples = 100;
  s.gem_memory = 32;
  return s;
}

ProspectiveConfig dyn_config(std::size_t d = 4) {
  ProspectiveConfig pc;
  pc.state_dim = d;
  pc.hidden = 16;
  pc.seed = 5;
  return pc;
}

BufferEntry entry(std::uint32_t task, std::size_t step, Provenance p = Provenance::original) {
  BufferEntry e;
  e.window.inputs = nd::Tensor(nd::Shape{2, 2});
  e.window.inputs.at(1, 0) = static_cast<double>(step);
  e.window.target = 0.25 * static_cast<double>(step);
  e.window.task = TaskId{task};
  e.window.step = step;
  e.provenance = p;
  e.pair = step;
  return e;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_buffer_invariants(const RehearsalBuffer& b) {
  CHECK(b.size() <= b.capacity());
  CHECK(b.balanced());
  std::size_t total = 0;
  for (TaskId t : b.tasks()) total += b.count(t);
  CHECK(total == b.size());
}

}  // namespace

TEST_CASE("strategy config validation") {
  StrategyConfig s = strategy(StrategyKind::ewc);
  CHECK(s.lambda() == 100.0);
  s.kind = StrategyKind::si;
  CHECK(s.lambda() == 1.0);
  s.strength = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(parse_strategy_kind("noise_aug") == StrategyKind::noise_aug);
  CHECK_THROWS_AS(parse_strategy_kind("replay"), ConfigError);
  CHECK(strategy(StrategyKind::er).uses_buffer());
  CHECK(!strategy(StrategyKind::ewc).uses_buffer());
}

TEST_CASE("reservoir selection is seeded and nested") {
  const auto a = reservoir_select(100, 20, 9);
  CHECK(a.size() == 20);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 20);
  CHECK(a == reservoir_select(100, 20, 9));
  CHECK(a != reservoir_select(100, 20, 10));
  const auto b = reservoir_select(100, 10, 9);
  CHECK(std::includes(a.begin(), a.end(), b.begin(), b.end()));
  CHECK(reservoir_select(5, 10, 1).size() == 5);
}

TEST_CASE("buffer capacity and balance") {
  RehearsalBuffer b(10);
  CHECK(b.quota(1) == 10);
  CHECK(b.quota(3) == 2);
  CHECK(b.quota(4) == 2);
  std::vector<BufferEntry> six;
  for (std::size_t i = 0; i < 6; ++i) six.push_back(entry(0, i));
  b.set_task(TaskId{0}, six);
  CHECK(b.size() == 6);
  auto for_task = [](std::uint32_t task, std::size_t n) {
    std::vector<BufferEntry> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(entry(task, i));
    return out;
  };
  CHECK_THROWS_AS(b.set_task(TaskId{1}, for_task(1, 5)), UsageError);
  CHECK_THROWS_AS(b.set_task(TaskId{1}, for_task(0, 1)), UsageError);
  b.set_task(TaskId{0}, for_task(0, 4));
  b.set_task(TaskId{1}, for_task(1, 5));
  check_buffer_invariants(b);
  b.set_task(TaskId{2}, for_task(2, 1));
  CHECK(!b.balanced());
  CHECK(b.count(Provenance::original) == 10);
}

TEST_CASE("buffer dump and restore are exact") {
  RehearsalBuffer b(40);
  std::vector<BufferEntry> e0, e1;
  for (std::size_t i = 0; i < 4; ++i) {
    e0.push_back(entry(0, i));
    e0.back().window.inputs.at(0, 1) = 0.1 + 1.0 / 3.0 * static_cast<double>(i);
    e1.push_back(entry(5, 10 + i, i % 2 ? Provenance::prospective : Provenance::original));
  }
  b.set_task(TaskId{0}, e0);
  b.set_task(TaskId{5}, e1);
  const RehearsalBuffer back = restore_buffer(dump_buffer(b));
  CHECK(back == b);
  CHECK(back.count(Provenance::prospective) == 2);
  CHECK_THROWS(restore_buffer("garbage"));
}

TEST_CASE("noise augmentation statistics") {
  std::vector<BufferEntry> entries;
  std::mt19937_64 g(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (std::size_t i = 0; i < 2000; ++i) {
    BufferEntry e = entry(0, i);
    e.window.inputs = nd::Tensor(nd::Shape{5, 2});
    for (std::size_t r = 0; r < 5; ++r) {
      e.window.inputs.at(r, 0) = n(g);
      e.window.inputs.at(r, 1) = 0.1 * n(g);
    }
    entries.push_back(e);
  }
  nd::Rng rng(1);
  const auto same = noise_augment(entries, 0.0, rng);
  REQUIRE(same.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); i += 97) {
    CHECK(same[i].window == entries[i].window);
    CHECK(same[i].provenance == Provenance::noise);
    CHECK(same[i].pair == entries[i].pair);
  }

  // 2000 windows x 5 rows = 10k noise draws per feature.
  const auto noisy = noise_augment(entries, 0.5, rng);
  for (std::size_t f = 0; f < 2; ++f) {
    double sx = 0, sxx = 0, nx = 0, s = 0, ss = 0;
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t r = 0; r < 5; ++r) {
        const double x = entries[i].window.inputs.at(r, f);
        const double e = noisy[i].window.inputs.at(r, f) - x;
        sx += x;
        sxx += x * x;
        s += e;
        ss += e * e;
        nx += 1;
      }
    const double sigma_f = std::sqrt(sxx / nx - (sx / nx) * (sx / nx));
    const double sigma_e = std::sqrt(ss / nx - (s / nx) * (s / nx));
    CHECK(sigma_e == doctest::Approx(0.5 * sigma_f).epsilon(0.05));
  }
  CHECK(noisy[0].window.target == entries[0].window.target);
}

TEST_CASE("ewc penalty") {
  nd::Tensor w(nd::Shape{3}), anchor(nd::Shape{3}), fisher(nd::Shape{3});
  w.data()[0] = 1.0, w.data()[1] = -2.0, w.data()[2] = 0.5;
  anchor.data()[0] = 0.5, anchor.data()[1] = -1.0, anchor.data()[2] = 0.5;
  fisher.data()[0] = 2.0, fisher.data()[1] = 0.25, fisher.data()[2] = 9.0;
  ParamRefs params{{"w", &w}};

  EwcPenalty zero(0.0);
  zero.add_task({{"w", anchor}}, {{"w", fisher}});
  CHECK(zero.value(params) == 0.0);

  EwcPenalty at_anchor(100.0);
  at_anchor.add_task({{"w", w}}, {{"w", fisher}});
  CHECK(at_anchor.value(params) == 0.0);

  const double lambda = 3.0;
  EwcPenalty pen(lambda);
  pen.add_task({{"w", anchor}}, {{"w", fisher}});
  CHECK(pen.value(params) == doctest::Approx(lambda / 2.0 * (2.0 * 0.25 + 0.25 * 1.0)));

  GradList grads(1);
  pen.add_gradient(params, grads);
  REQUIRE(grads[0].size() == 3);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    const double analytic = 2.0 * lambda * fisher.data()[i] * (w.data()[i] - anchor.data()[i]) / 2.0;
    CHECK(grads[0].data()[i] == doctest::Approx(analytic).epsilon(1e-12));
    const double keep = w.data()[i];
    w.data()[i] = keep + h;
    const double up = pen.value(params);
    w.data()[i] = keep - h;
    const double down = pen.value(params);
    w.data()[i] = keep;
    CHECK(grads[0].data()[i] == doctest::Approx((up - down) / (2.0 * h)).epsilon(1e-6));
  }
}

TEST_CASE("si path integral and importance") {
  nd::Tensor w(nd::Shape{2});
  w.data()[0] = 1.0, w.data()[1] = 1.0;
  ParamRefs params{{"w", &w}};
  SiPenalty si(2.0, 0.1);
  si.begin_task(params);
  // two steps of plain gradient descent with lr 0.5 on gradients (1, -2) and (0.5, 0)
  const std::vector<std::vector<double>> steps{{1.0, -2.0}, {0.5, 0.0}};
  for (const auto& g : steps) {
    std::vector<nd::Tensor> before{w};
    GradList grads(1, nd::Tensor(nd::Shape{2}));
    grads[0].data()[0] = g[0], grads[0].data()[1] = g[1];
    w.data()[0] -= 0.5 * g[0];
    w.data()[1] -= 0.5 * g[1];
    si.observe(params, grads, before);
  }
  const auto& omega = si.path_integral().at("w");
  // omega = sum -g * dtheta = sum 0.5 g^2
  CHECK(omega.data()[0] == doctest::Approx(0.5 * (1.0 + 0.25)));
  CHECK(omega.data()[1] == doctest::Approx(0.5 * 4.0));
  si.end_task(params);
  const auto& imp = si.importance().at("w");
  const double d0 = -0.75, d1 = 1.0;
  CHECK(imp.data()[0] == doctest::Approx(0.625 / (d0 * d0 + 0.1)));
  CHECK(imp.data()[1] == doctest::Approx(2.0 / (d1 * d1 + 0.1)));
  CHECK(si.value(params) == 0.0);

  w.data()[0] += 0.2;
  CHECK(si.value(params) == doctest::Approx(2.0 * imp.data()[0] * 0.04));
  GradList grads(1);
  si.add_gradient(params, grads);
  CHECK(grads[0].data()[0] == doctest::Approx(2.0 * 2.0 * imp.data()[0] * 0.2));
  CHECK(grads[0].data()[1] == doctest::Approx(0.0));

  SiPenalty off(0.0, 0.1);
  off.begin_task(params);
  off.end_task(params);
  w.data()[1] += 3.0;
  CHECK(off.value(params) == 0.0);
}

TEST_CASE("gem leaves compatible gradients alone") {
  const std::vector<double> g{1.0, 2.0, -0.5};
  const auto r = gem_project(g, {{1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}});
  CHECK(!r.projected);
  CHECK(r.gradient == g);
}

TEST_CASE("gem single constraint closed form") {
  const std::vector<double> g{1.0, -2.0, 0.5}, m{0.5, 1.0, 1.0};
  const auto r = gem_project(g, {m});
  CHECK(r.projected);
  const double c = dot(g, m) / dot(m, m);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r.gradient[i] == doctest::Approx(g[i] - c * m[i]).epsilon(1e-9));
  CHECK(std::abs(dot(r.gradient, m)) < 1e-9);
}

TEST_CASE("gem drops zero memory gradients") {
  const std::vector<double> g{1.0, -1.0};
  const auto r = gem_project(g, {{0.0, 0.0}, {0.0, 1.0}});
  CHECK(r.dropped == 1);
  CHECK(r.gradient[0] == doctest::Approx(1.0));
  CHECK(r.gradient[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("gem three constraints agree with a grid-searched dual") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n;
  int checked = 0;
  for (int rep = 0; rep < 40 && checked < 8; ++rep) {
    const std::size_t dim = 5;
    std::vector<std::vector<double>> mem(3, std::vector<double>(dim));
    std::vector<double> g(dim);
    for (auto& row : mem)
      for (double& v : row) v = n(rng);
    for (double& v : g) v = n(rng);
    bool violated = false;
    for (const auto& row : mem) violated |= dot(g, row) < 0.0;
    if (!violated) continue;
    ++checked;

    const auto r = gem_project(g, mem);
    for (const auto& row : mem) CHECK(dot(r.gradient, row) >= -1e-9);

    // Dual: g~ = g + M^T v with v >= 0 minimising 1/2 |M^T v|^2 + g.M^T v. Search a grid, then
    // repeatedly refine a finer grid around the best point.
    auto primal = [&](const std::array<double, 3>& v) {
      std::vector<double> x = g;
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < dim; ++i) x[i] += v[j] * mem[j][i];
      return x;
    };
    auto objective = [&](const std::array<double, 3>& v) {
      const auto x = primal(v);
      return 0.5 * dot(x, x);
    };
    std::array<double, 3> best{0, 0, 0}, lo{0, 0, 0};
    double span = 10.0, best_val = objective(best);
    for (int level = 0; level < 12; ++level) {
      const int steps = 20;
      for (int a = 0; a <= steps; ++a)
        for (int b = 0; b <= steps; ++b)
          for (int c = 0; c <= steps; ++c) {
            std::array<double, 3> v{lo[0] + span * a / steps, lo[1] + span * b / steps, lo[2] + span * c / steps};
            const double val = objective(v);
            if (val < best_val) best_val = val, best = v;
          }
      span /= 5.0;
      for (std::size_t j = 0; j < 3; ++j) lo[j] = std::max(0.0, best[j] - span / 2.0);
    }
    const auto oracle = primal(best);
    double dist = 0.0;
    for (std::size_t i = 0; i < dim; ++i) dist = std::max(dist, std::abs(r.gradient[i] - oracle[i]));
    CHECK(dist < 1e-3);
  }
  CHECK(checked == 8);
}

TEST_CASE("flatten and unflatten are inverse") {
  nd::Tensor a(nd::Shape{2, 2}), b(nd::Shape{3});
  ParamRefs params{{"a", &a}, {"b", &b}};
  GradList grads{nd::Tensor(nd::Shape{2, 2}), nd::Tensor()};
  grads[0].data()[3] = 4.0;
  const auto flat = flatten(params, grads);
  CHECK(flat.size() == 7);
  CHECK(flat[3] == 4.0);
  GradList back(2);
  unflatten(flat, params, back);
  CHECK(back[0] == grads[0]);
  CHECK(back[1].empty());
}

TEST_CASE("prospective windows differ from originals only at the last step") {
  const auto tasks = small_suite(1);
  MultiTaskModel model(small_model());
  model.add_task_head(TaskId{0});
  ProspectiveModel g(dyn_config());
  const auto steps = rehearsal_candidates(tasks[0], 6);
  REQUIRE(steps.size() > 20);
  const std::vector<std::size_t> picked(steps.begin(), steps.begin() + 20);
  const auto entries = build_prospective_rehearsal(model, g, tasks[0], picked, 6);
  REQUIRE(entries.size() == 40);
  std::size_t originals = 0, imagined = 0;
  std::map<std::size_t, std::vector<const BufferEntry*>> by_pair;
  for (const auto& e : entries) {
    (e.provenance == Provenance::original ? originals : imagined) += 1;
    by_pair[e.pair].push_back(&e);
    CHECK(e.window.target == tasks[0].targets[e.window.step]);
  }
  CHECK(originals == imagined);
  for (const auto& [pair, members] : by_pair) {
    REQUIRE(members.size() == 2);
    const auto& o = members[0]->provenance == Provenance::original ? *members[0] : *members[1];
    const auto& p = members[0]->provenance == Provenance::original ? *members[1] : *members[0];
    CHECK(p.provenance == Provenance::prospective);
    CHECK(o.window.step == p.window.step);
    bool last_differs = false;
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t i = 0; i < 4; ++i) {
        if (r + 1 < 6) CHECK(o.window.inputs.at(r, i) == p.window.inputs.at(r, i));
        else last_differs |= o.window.inputs.at(r, i) != p.window.inputs.at(r, i);
      }
    CHECK(last_differs);
  }
}

TEST_CASE("exact dynamics reproduce the original windows") {
  // Noise-free states with even d evolve linearly; fit the transition exactly and wire it into g.
  TaskSpec spec = small_task(0, 0.9, 0.0, 400, 0.0);
  spec.trials = 1;
  const TaskSeries s = generate_task(spec);
  const std::size_t d = 4;
  Eigen::MatrixXd x(s.size() - 1, d), y(s.size() - 1, d);
  for (std::size_t k = 0; k + 1 < s.size(); ++k)
    for (std::size_t i = 0; i < d; ++i) x(k, i) = s.states.at(k, i), y(k, i) = s.states.at(k + 1, i);
  const Eigen::MatrixXd a = x.colPivHouseholderQr().solve(y);  // x_{k+1} = x_k a

  ProspectiveModel g(dyn_config(d));
  // relu(z) - relu(-z) = z, so hidden = [z, -z] and output weights [C; -C] give a linear map.
  for (double& v : g.hidden.weight.data()) v = 0.0;
  for (double& v : g.hidden.bias.data()) v = 0.0;
  for (double& v : g.output.weight.data()) v = 0.0;
  for (double& v : g.output.bias.data()) v = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    g.hidden.weight.at(i, i) = 1.0;
    g.hidden.weight.at(i, d + i) = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      g.output.weight.at(i, j) = a(i, j);
      g.output.weight.at(d + i, j) = -a(i, j);
    }
  }
  MultiTaskModel model(small_model());
  model.add_task_head(TaskId{0});
  const auto steps = rehearsal_candidates(s, 6);
  const auto entries = build_prospective_rehearsal(model, g, s, steps, 6);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < entries.size(); i += 2)
    for (std::size_t v = 0; v < entries[i].window.inputs.size(); ++v)
      worst = std::max(worst, std::abs(entries[i].window.inputs.data()[v] - entries[i + 1].window.inputs.data()[v]));
  CHECK(worst < 1e-8);
}

TEST_CASE("prospective model training") {
  const auto tasks = small_suite(2, 600);
  ProspectiveModel g(dyn_config());
  TrainConfig tc = quick_train(30);
  const DynamicsFit fit = train_prospective(g, tasks[0], tc, 1);
  CHECK(fit.pairs > 0);
  CHECK(fit.train_loss < fit.initial_loss);
  const double own = dynamics_mse(g, transitions(tasks[0], tasks[0].train_end, tasks[0].size()));
  const double other = dynamics_mse(g, transitions(tasks[1], 0, tasks[1].size()));
  CHECK(own < other);

  const Transitions pairs = transitions(tasks[0], 0, tasks[0].size());
  for (std::size_t k = 0; k < pairs.size(); ++k) CHECK(std::isfinite(pairs.outputs[k]));
  TaskSeries lonely = tasks[0];
  std::iota(lonely.trial.begin(), lonely.trial.end(), 0);
  CHECK(transitions(lonely, 0, lonely.size()).size() == 0);
  ProspectiveModel g2(dyn_config());
  CHECK_THROWS(train_prospective(g2, lonely, tc, 1));
}

TEST_CASE("single task training reduces the loss") {
  const auto tasks = small_suite(1);
  ContinualLearner learner(small_model(), strategy(StrategyKind::none), quick_train(5), dyn_config());
  const auto log = learner.learn(tasks[0]);
  REQUIRE(log.fit.epochs.size() >= 2);
  CHECK(log.fit.epochs.back().train_loss < log.fit.epochs.front().train_loss);
  CHECK(!log.dynamics);
  CHECK(learner.buffer().size() == 0);
}

TEST_CASE("old heads are untouched when a new task is learned") {
  const auto tasks = small_suite(2);
  ContinualLearner learner(small_model(), strategy(StrategyKind::none), quick_train(3), dyn_config());
  learner.learn(tasks[0]);
  const auto head0 = snapshot(learner.model().head_parameters(TaskId{0}));
  const auto backbone0 = snapshot(learner.model().backbone_parameters());
  learner.learn(tasks[1]);
  for (const auto& [name, t] : snapshot(learner.model().head_parameters(TaskId{0}))) CHECK(nd::bit_identical(t, head0.at(name)));
  bool moved = false;
  for (const auto& [name, t] : snapshot(learner.model().backbone_parameters())) moved |= !nd::bit_identical(t, backbone0.at(name));
  CHECK(moved);
}

TEST_CASE("buffer invariants hold after every task") {
  const auto tasks = small_suite(4, 300);
  std::map<StrategyKind, std::vector<std::size_t>> sizes;
  for (auto kind : {StrategyKind::er, StrategyKind::prospective, StrategyKind::noise_aug}) {
    CAPTURE(to_string(kind));
    ContinualLearner learner(small_model(), strategy(kind, 120), quick_train(2), dyn_config());
    for (const auto& t : tasks) {
      const auto log = learner.learn(t);
      const RehearsalBuffer& b = learner.buffer();
      check_buffer_invariants(b);
      CHECK(b.tasks().size() == learner.tasks().size());
      CHECK(log.buffer_size == b.size());
      sizes[kind].push_back(b.size());
      if (kind == StrategyKind::prospective) CHECK(b.count(Provenance::original) == b.count(Provenance::prospective));
      if (kind == StrategyKind::noise_aug) CHECK(b.count(Provenance::original) == b.count(Provenance::noise));
      if (kind == StrategyKind::er) CHECK(b.count(Provenance::original) == b.size());
      for (TaskId task : b.tasks()) {
        std::map<std::size_t, std::size_t> pairs;
        for (const auto& e : b.entries(task)) {
          CHECK(e.window.task == task);
          ++pairs[e.pair];
        }
        if (kind != StrategyKind::er)
          for (const auto& [id, n] : pairs) CHECK(n == 2);
      }
    }
  }
  CHECK(sizes[StrategyKind::er] == sizes[StrategyKind::prospective]);
  CHECK(sizes[StrategyKind::er] == sizes[StrategyKind::noise_aug]);
  CHECK(sizes[StrategyKind::er].back() == 120);
}

TEST_CASE("prospective rehearsal draws both loss terms") {
  const auto tasks = small_suite(2, 300);
  ContinualLearner learner(small_model(), strategy(StrategyKind::prospective), quick_train(2), dyn_config());
  learner.learn(tasks[0]);
  const auto log = learner.learn(tasks[1]);
  REQUIRE(log.dynamics);
  const auto& usage = log.fit.rehearsal_usage;
  REQUIRE(usage.count(Provenance::original));
  REQUIRE(usage.count(Provenance::prospective));
  CHECK(usage.at(Provenance::original) > 0);
  CHECK(usage.at(Provenance::original) == usage.at(Provenance::prospective));
  CHECK(usage.count(Provenance::noise) == 0);
  CHECK(learner.dynamics().size() == 2);
}

TEST_CASE("error matrix is reproducible and complete") {
  const auto tasks = small_suite(3, 300);
  const auto tests = tests_for(tasks, 300);
  auto run = [&](StrategyKind kind) {
    ContinualLearner learner(small_model(), strategy(kind), quick_train(2), dyn_config());
    return train_task_incremental(learner, tasks, tests);
  };
  for (auto kind : {StrategyKind::none, StrategyKind::er, StrategyKind::ewc, StrategyKind::si, StrategyKind::gem}) {
    CAPTURE(to_string(kind));
    const TrainLog a = run(kind), b = run(kind);
    CHECK(a.nrmse.lower_triangle_complete());
    CHECK(a.nrmse.entries() == b.nrmse.entries());
    CHECK(a.r2 == b.r2);
    CHECK(a.r2.size() == 6);
  }
}

TEST_CASE("progressive columns stay frozen") {
  const auto tasks = small_suite(3, 300);
  const auto tests = tests_for(tasks, 300);
  ContinualLearner learner(small_model(BackboneKind::mlp), strategy(StrategyKind::pnn), quick_train(2), dyn_config());
  std::vector<ParamSnapshot> columns;
  TrainLog log;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    learner.learn(tasks[i]);
    CHECK(learner.pnn().column_count() == i + 1);
    auto& pnn = const_cast<PnnModel&>(learner.pnn());
    for (std::size_t j = 0; j < columns.size(); ++j)
      for (const auto& [name, t] : snapshot(pnn.column_parameters(tasks[j].task))) CHECK(nd::bit_identical(t, columns[j].at(name)));
    columns.push_back(snapshot(pnn.column_parameters(tasks[i].task)));
    for (std::size_t j = 0; j <= i; ++j) {
      const auto windows = make_windows(tests[j], learner.window());
      log.nrmse.set(i + 1, j + 1, evaluate(learner.predictor(), tasks[j].task, windows).nrmse);
    }
  }
  for (std::size_t j = 1; j <= 3; ++j)
    for (std::size_t i = j + 1; i <= 3; ++i) CHECK(log.nrmse.at(i, j) <= log.nrmse.at(i - 1, j) + 1e-6);
  CHECK(!learner.pnn().has_task(TaskId{9}));
  CHECK_THROWS(const_cast<PnnModel&>(learner.pnn()).column_parameters(TaskId{9}));
}

TEST_CASE("joint training keeps the sample budget equal across modes") {
  const auto tasks = small_suite(2, 300);
  std::vector<std::size_t> budgets;
  for (auto mode : {JointMode::original, JointMode::prospective}) {
    MultiTaskModel model(small_model());
    for (const auto& t : tasks) model.add_task_head(t.task);
    const JointResult r = train_joint(model, tasks, mode, strategy(StrategyKind::none), quick_train(2), dyn_config());
    budgets.push_back(r.budget());
    CHECK(r.augmentation > 0);
    CHECK(r.dynamics.size() == (mode == JointMode::prospective ? 2u : 0u));
  }
  CHECK(budgets[0] == budgets[1]);
  CHECK(parse_joint_mode("prospective") == JointMode::prospective);
}
