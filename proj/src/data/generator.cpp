#include "foresight/data/generator.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "foresight/errors.hpp"
#include "foresight/log.hpp"
#include "foresight/ndkernel/random.hpp"

namespace foresight {

std::vector<double> phase_features(double theta, std::size_t dim) {
  std::vector<double> phi(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double harmonic = static_cast<double>(i / 2 + 1);
    phi[i] = (i % 2 == 0) ? std::sin(harmonic * theta) : std::cos(harmonic * theta);
  }
  return phi;
}

double target_profile(double theta, double incline, double harmonic) {
  return (1.0 + 0.3 * incline) * std::sin(theta) + 0.2 * incline * std::sin(2.0 * theta) +
         harmonic * std::sin(3.0 * theta);
}

void TaskSpec::validate(std::size_t window) const {
  if (!(speed > 0.0)) throw ConfigError("task " + id.str() + ": speed must be > 0");
  if (input_dim < 2) throw ConfigError("task " + id.str() + ": input_dim must be >= 2");
  if (samples < 3 * window) throw ConfigError("task " + id.str() + ": samples must be >= 3 * window");
  if (!(noise >= 0.0)) throw ConfigError("task " + id.str() + ": noise must be >= 0");
  if (!(phase_jitter >= 0.0) || phase_jitter > 1.0) throw ConfigError("task " + id.str() + ": phase_jitter must be in [0, 1]");
  if (!(dt > 0.0)) throw ConfigError("task " + id.str() + ": dt must be > 0");
  if (trials < 1 || trials > samples) throw ConfigError("task " + id.str() + ": trials must be in [1, samples]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("task " + id.str() + ": train_fraction must be in (0, 1)");
  }
}

nd::Tensor mixing_matrix(const TaskSpec& spec) {
  const std::size_t d = spec.input_dim;
  const double stddev = std::sqrt(2.0 / static_cast<double>(d));
  for (std::uint64_t attempt = 0;; ++attempt) {
    nd::Rng rng(nd::derive_seed(spec.seed + attempt, 0x4d49u));
    Eigen::MatrixXd m(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m(i, j) = nd::normal(rng, 0.0, stddev);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    if (std::isfinite(cond) && cond < 1e3) {
      nd::Tensor out(nd::Shape{d, d});
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = m(i, j);
      return out;
    }
    log::info("task " + spec.id.str() + ": mixing matrix ill-conditioned (cond " + std::to_string(cond) +
              "), resampling with seed offset " + std::to_string(attempt + 1));
  }
}

namespace {

void mix_row(const nd::Tensor& m, std::span<const double> phi, double* out) {
  const std::size_t d = phi.size();
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += m.at(i, j) * phi[j];
    out[i] = acc;
  }
}

}  // namespace

TaskSeries generate_task(const TaskSpec& spec) {
  spec.validate();
  const std::size_t n = spec.samples, d = spec.input_dim;
  LatentState latent{std::vector<double>(n), mixing_matrix(spec), nd::Tensor(nd::Shape{n, d})};
  TaskSeries s;
  s.task = spec.id;
  s.states = nd::Tensor(nd::Shape{n, d});
  s.targets.resize(n);
  s.trial.resize(n);
  s.train_end = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  if (s.train_end == 0 || s.train_end >= n) throw ConfigError("task " + spec.id.str() + ": empty train or validation split");

  nd::Rng rng(nd::derive_seed(spec.sample_seed, 0x53u, spec.id.value));
  const double step = 2.0 * M_PI * spec.speed * spec.dt;
  const std::size_t per_trial = n / spec.trials;
  double theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t trial = std::min(k / per_trial, spec.trials - 1);
    if (k == 0 || static_cast<std::int64_t>(trial) != s.trial[k - 1]) {
      theta = nd::uniform(rng, 0.0, 2.0 * M_PI);
    } else {
      theta += spec.phase_jitter > 0.0 ? step * (1.0 + nd::normal(rng, 0.0, spec.phase_jitter)) : step;
    }
    s.trial[k] = static_cast<std::int64_t>(trial);
    latent.phase[k] = theta;
    const auto phi = phase_features(theta, d);
    double* row = s.states.raw() + k * d;
    mix_row(latent.mixing, phi, row);
    for (std::size_t i = 0; i < d; ++i) {
      const double eps = spec.noise > 0.0 ? nd::normal(rng, 0.0, spec.noise) : 0.0;
      latent.noise.at(k, i) = eps;
      row[i] += eps;
    }
    s.targets[k] = target_profile(theta, spec.incline, spec.harmonic);
  }
  s.latent = std::move(latent);
  s.validate();
  return s;
}

TaskSpec held_out_spec(const TaskSpec& spec) {
  TaskSpec t = spec;
  t.sample_seed = nd::derive_seed(spec.sample_seed, 0x7e57u);
  return t;
}

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::phase_offset: return "phase_offset";
    case ShiftKind::amplitude_scale: return "amplitude_scale";
    case ShiftKind::additive_bias: return "additive_bias";
  }
  return "?";
}

ShiftKind parse_shift_kind(const std::string& name) {
  if (name == "phase_offset") return ShiftKind::phase_offset;
  if (name == "amplitude_scale") return ShiftKind::amplitude_scale;
  if (name == "additive_bias") return ShiftKind::additive_bias;
  throw ConfigError("unknown shift kind '" + name + "'");
}

TaskSeries apply_shift(const TaskSeries& series, const ShiftSpec& shift) {
  if (!std::isfinite(shift.magnitude)) throw ConfigError("shift: magnitude must be finite");
  TaskSeries out = series;
  if (shift.magnitude == 0.0) return out;
  const std::size_t n = series.size(), d = series.dim();
  switch (shift.kind) {
    case ShiftKind::phase_offset: {
      if (!series.latent) throw UsageError("shift: phase_offset needs a generated series with latent state");
      const LatentState& lat = *series.latent;
      for (std::size_t k = 0; k < n; ++k) {
        const auto phi = phase_features(lat.phase[k] + shift.magnitude, d);
        double* row = out.states.raw() + k * d;
        mix_row(lat.mixing, phi, row);
        for (std::size_t i = 0; i < d; ++i) row[i] += lat.noise.at(k, i);
      }
      break;
    }
    case ShiftKind::amplitude_scale: {
      const double f = 1.0 + shift.magnitude;
      for (double& v : out.states.data()) v *= f;
      for (double& v : out.targets) v *= f;
      break;
    }
    case ShiftKind::additive_bias: {
      std::vector<double> offset(d, shift.magnitude);
      if (series.latent) {
        const std::vector<double> ones(d, shift.magnitude);
        mix_row(series.latent->mixing, ones, offset.data());
      }
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i) out.states.at(k, i) += offset[i];
      break;
    }
  }
  out.latent.reset();
  out.validate();
  return out;
}

std::string to_string(SuiteKind kind) { return kind == SuiteKind::enabl3s_like ? "enabl3s_like" : "embry_like"; }

SuiteKind parse_suite_kind(const std::string& name) {
  if (name == "enabl3s_like") return SuiteKind::enabl3s_like;
  if (name == "embry_like") return SuiteKind::embry_like;
  throw ConfigError("unknown suite '" + name + "' (expected enabl3s_like or embry_like)");
}

std::vector<TaskSpec> make_suite(SuiteKind kind, const SuiteOptions& o) {
  struct Mode {
    double speed, incline, harmonic;
  };
  std::vector<Mode> modes;
  if (kind == SuiteKind::enabl3s_like) {
    // level walk, ramp ascent, ramp descent, stair ascent, stair descent
    modes = {{1.0, 0.0, 0.0}, {0.9, 1.0, 0.0}, {1.1, -1.0, 0.1}, {0.8, 1.5, 0.3}, {1.2, -1.5, -0.25}};
  } else {
    for (double s : {0.8, 1.0, 1.2})
      for (double a : {-1.0, 0.0, 1.0}) modes.push_back({s, a, 0.0});
  }
  std::vector<TaskSpec> out;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    TaskSpec t;
    t.id = TaskId{static_cast<std::uint32_t>(i)};
    t.speed = modes[i].speed;
    t.incline = modes[i].incline;
    t.harmonic = modes[i].harmonic;
    t.input_dim = o.input_dim;
    t.samples = o.samples;
    t.noise = o.noise;
    t.dt = o.dt;
    t.trials = o.trials;
    t.phase_jitter = o.phase_jitter;
    t.seed = nd::derive_seed(o.seed, 0x7a5u, i);
    t.sample_seed = nd::derive_seed(o.seed, 0x5a3u, i);
    out.push_back(t);
  }
  return out;
}

}  // namespace foresight
