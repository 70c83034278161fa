#include "foresight/robustness/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "foresight/errors.hpp"
#include "foresight/models/layers.hpp"
#include "foresight/ndkernel/ops.hpp"
#include "foresight/ndkernel/sgd.hpp"

namespace foresight {

namespace ops = nd::ops;

std::string to_string(ProbeKind kind) { return kind == ProbeKind::linear ? "linear" : "mlp"; }

ProbeKind parse_probe_kind(const std::string& name) {
  if (name == "linear") return ProbeKind::linear;
  if (name == "mlp") return ProbeKind::mlp;
  throw ConfigError("unknown probe '" + name + "' (expected linear or mlp)");
}

void ProbeConfig::validate() const {
  if (kind == ProbeKind::mlp && hidden < 1) throw ConfigError("probe: hidden must be >= 1");
  if (epochs < 1 || batch_size < 1) throw ConfigError("probe: epochs and batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("probe: learning_rate must be > 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("probe: train_fraction must be in (0, 1)");
}

namespace {

struct Classifier {
  Dense first;
  Dense second;
  bool mlp = false;

  nd::Var forward(Binding& bind, const nd::Var& x) const {
    if (!mlp) return first.forward(bind, x);
    return second.forward(bind, ops::relu(first.forward(bind, x)));
  }
  ParamRefs params() {
    ParamRefs out;
    first.collect(out, "probe.first");
    if (mlp) second.collect(out, "probe.second");
    return out;
  }
};

nd::Tensor rows_of(const nd::Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t F = x.dim(1);
  nd::Tensor out(nd::Shape{idx.size(), F});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t f = 0; f < F; ++f) out.at(i, f) = x.at(idx[i], f);
  return out;
}

double accuracy(const Classifier& c, const nd::Tensor& x, std::span<const std::size_t> labels) {
  nd::Tape tape;
  Binding bind(tape, false);
  const nd::Tensor logits = c.forward(bind, tape.constant(x)).value();
  const std::size_t C = logits.dim(1);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < C; ++k)
      if (logits.at(i, k) > logits.at(i, best)) best = k;
    hit += best == labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace

ProbeResult probe_features(const nd::Tensor& features, std::span<const std::size_t> labels, const ProbeConfig& cfg) {
  cfg.validate();
  if (features.rank() != 2 || features.dim(0) != labels.size()) throw ShapeError("probe: features and labels disagree");
  const std::set<std::size_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw UsageError("probe: at least two classes are required");
  const std::size_t C = *distinct.rbegin() + 1, N = labels.size(), F = features.dim(1);

  nd::Rng rng(cfg.seed);
  const auto perm = nd::permutation(rng, N);
  const std::size_t n_train = std::clamp<std::size_t>(static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(N)), 1, N - 1);
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

  nd::Tensor xtr = rows_of(features, tr), xte = rows_of(features, te);
  for (std::size_t f = 0; f < F; ++f) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n_train; ++i) mean += xtr.at(i, f);
    mean /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < n_train; ++i) sq += (xtr.at(i, f) - mean) * (xtr.at(i, f) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n_train));
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < xtr.dim(0); ++i) xtr.at(i, f) = (xtr.at(i, f) - mean) * inv;
    for (std::size_t i = 0; i < xte.dim(0); ++i) xte.at(i, f) = (xte.at(i, f) - mean) * inv;
  }
  std::vector<std::size_t> ytr, yte;
  for (auto i : tr) ytr.push_back(labels[i]);
  for (auto i : te) yte.push_back(labels[i]);

  nd::Rng init(nd::derive_seed(cfg.seed, 1));
  Classifier clf;
  clf.mlp = cfg.kind == ProbeKind::mlp;
  if (clf.mlp) {
    clf.first = Dense(F, cfg.hidden, init);
    clf.second = Dense(cfg.hidden, C, init);
  } else {
    clf.first = Dense(F, C, init);
  }
  ParamRefs params = clf.params();
  std::vector<nd::Tensor*> ptrs;
  for (auto& p : params) ptrs.push_back(p.tensor);
  nd::SgdState opt(cfg.learning_rate, 0.0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = nd::permutation(rng, n_train);
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t B = std::min(cfg.batch_size, n_train - start);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(start + B));
      std::vector<std::size_t> y;
      for (auto i : idx) y.push_back(ytr[i]);
      nd::Tape tape;
      Binding bind(tape);
      nd::Var loss = ops::scale(ops::softmax_cross_entropy(clf.forward(bind, tape.constant(rows_of(xtr, idx))), y),
                                1.0 / static_cast<double>(B));
      const nd::Gradients grads = tape.backward(loss);
      std::vector<const nd::Tensor*> gp(params.size(), nullptr);
      for (std::size_t k = 0; k < params.size(); ++k) gp[k] = bind.gradient(grads, *params[k].tensor);
      nd::sgd_step(ptrs, gp, opt);
    }
  }

  ProbeResult r;
  r.classes = distinct.size();
  r.train_size = n_train;
  r.test_size = te.size();
  r.train_accuracy = accuracy(clf, xtr, ytr);
  r.accuracy = accuracy(clf, xte, yte);
  return r;
}

ProbeResult probe_train_eval(const MultiTaskModel& model, std::span<const Window> windows,
                             std::span<const std::size_t> labels, const ProbeConfig& config) {
  if (windows.size() != labels.size()) throw ShapeError("probe: one label per window is required");
  MultiTaskModel before = model;
  const nd::Tensor features = model.backbone_features(stack_windows(windows));
  ProbeResult r = probe_features(features, labels, config);
  MultiTaskModel after = model;
  const ParamRefs a = before.backbone_parameters(), b = after.backbone_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) r.backbone_unchanged = r.backbone_unchanged && nd::bit_identical(*a[i].tensor, *b[i].tensor);
  return r;
}

}  // namespace foresight
