#include "foresight/robustness/perturb.hpp"

#include <cmath>

#include "foresight/errors.hpp"
#include "foresight/metrics/regression.hpp"
#include "foresight/ndkernel/ops.hpp"

namespace foresight {

std::string to_string(PerturbKind kind) { return kind == PerturbKind::fgsm ? "fgsm" : "gaussian"; }

PerturbKind parse_perturb_kind(const std::string& name) {
  if (name == "fgsm") return PerturbKind::fgsm;
  if (name == "gaussian") return PerturbKind::gaussian;
  throw ConfigError("unknown perturbation '" + name + "' (expected fgsm or gaussian)");
}

void PerturbSpec::validate() const {
  if (!std::isfinite(magnitude) || magnitude < 0.0) throw ConfigError("perturbation magnitude must be finite and >= 0");
}

std::vector<double> feature_std(std::span<const Window> windows) {
  if (windows.empty()) throw DataError("feature_std: no windows");
  const std::size_t d = windows.front().inputs.dim(1);
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  std::size_t rows = 0;
  for (const auto& w : windows)
    for (std::size_t r = 0; r < w.inputs.dim(0); ++r, ++rows)
      for (std::size_t f = 0; f < d; ++f) mean[f] += w.inputs.at(r, f);
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (const auto& w : windows)
    for (std::size_t r = 0; r < w.inputs.dim(0); ++r)
      for (std::size_t f = 0; f < d; ++f) sq[f] += (w.inputs.at(r, f) - mean[f]) * (w.inputs.at(r, f) - mean[f]);
  for (auto& s : sq) s = std::sqrt(s / static_cast<double>(rows));
  return sq;
}

std::vector<Window> fgsm_perturb(const Predictor& model, TaskId task, std::span<const Window> windows, double tau,
                                 std::span<const double> sigma) {
  if (!std::isfinite(tau) || tau < 0.0) throw ConfigError("fgsm: tau must be finite and >= 0");
  std::vector<Window> out(windows.begin(), windows.end());
  if (tau == 0.0 || windows.empty()) return out;
  const std::size_t d = windows.front().inputs.dim(1);
  if (!sigma.empty() && sigma.size() != d) throw ShapeError("fgsm: sigma has " + std::to_string(sigma.size()) + " entries for " + std::to_string(d) + " features");

  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const auto part = windows.subspan(start, std::min(kChunk, windows.size() - start));
    nd::Tape tape;
    Binding bind(tape, false);
    nd::Var x = tape.variable(stack_windows(part));
    nd::Var loss = nd::ops::sum_squared_error(model.forward(bind, task, x), nd::Tensor::vector(targets_of(part)));
    const nd::Gradients grads = tape.backward(loss);
    const nd::Tensor& g = grads.of(x);
    const std::size_t per = g.size() / part.size();
    for (std::size_t b = 0; b < part.size(); ++b) {
      double* rows = out[start + b].inputs.raw();
      for (std::size_t i = 0; i < per; ++i) {
        const double gi = g[b * per + i];
        if (gi == 0.0) continue;
        const double scale = sigma.empty() ? 1.0 : sigma[i % d];
        rows[i] += (gi > 0.0 ? tau : -tau) * scale;
      }
    }
  }
  return out;
}

std::vector<Window> noise_perturb(std::span<const Window> windows, double level, std::span<const double> sigma, nd::Rng& rng) {
  if (!std::isfinite(level) || level < 0.0) throw ConfigError("noise: level must be finite and >= 0");
  std::vector<Window> out(windows.begin(), windows.end());
  if (level == 0.0) return out;
  for (auto& w : out) {
    const std::size_t d = w.inputs.dim(1);
    if (sigma.size() != d) throw ShapeError("noise: sigma length differs from the feature count");
    for (std::size_t i = 0; i < w.inputs.size(); ++i) w.inputs[i] += nd::normal(rng, 0.0, level * sigma[i % d]);
  }
  return out;
}

namespace {

double r2_of(const Predictor& model, TaskId task, std::span<const Window> windows) {
  return metrics::r_squared(targets_of(windows), predict_windows(model, task, windows));
}

}  // namespace

std::vector<RobustnessPoint> fgsm_curve(const Predictor& model, std::span<const TaskWindows> tasks, std::span<const double> taus) {
  if (tasks.empty()) throw UsageError("fgsm_curve: no tasks");
  std::vector<RobustnessPoint> out;
  for (double tau : taus) {
    double acc = 0.0;
    for (const auto& t : tasks) {
      const auto sigma = feature_std(t.windows);
      acc += r2_of(model, t.task, fgsm_perturb(model, t.task, t.windows, tau, sigma));
    }
    out.push_back({tau, acc / static_cast<double>(tasks.size())});
  }
  return out;
}

std::vector<RobustnessPoint> noise_curve(const Predictor& model, std::span<const TaskWindows> tasks,
                                         std::span<const double> levels, std::uint64_t seed) {
  if (tasks.empty()) throw UsageError("noise_curve: no tasks");
  std::vector<RobustnessPoint> out;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    double acc = 0.0;
    for (const auto& t : tasks) {
      const auto sigma = feature_std(t.windows);
      nd::Rng rng(nd::derive_seed(seed, t.task.value));
      acc += r2_of(model, t.task, noise_perturb(t.windows, levels[li], sigma, rng));
    }
    out.push_back({levels[li], acc / static_cast<double>(tasks.size())});
  }
  return out;
}

}  // namespace foresight
