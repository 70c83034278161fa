#include "foresight/continual/config.hpp"

#include <cmath>

#include "foresight/errors.hpp"

namespace foresight {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::none: return "none";
    case StrategyKind::er: return "er";
    case StrategyKind::prospective: return "prospective";
    case StrategyKind::noise_aug: return "noise_aug";
    case StrategyKind::ewc: return "ewc";
    case StrategyKind::si: return "si";
    case StrategyKind::gem: return "gem";
    case StrategyKind::pnn: return "pnn";
  }
  return "?";
}

StrategyKind parse_strategy_kind(const std::string& name) {
  for (auto k : {StrategyKind::none, StrategyKind::er, StrategyKind::prospective, StrategyKind::noise_aug,
                 StrategyKind::ewc, StrategyKind::si, StrategyKind::gem, StrategyKind::pnn}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown strategy '" + name + "' (expected none, er, prospective, noise_aug, ewc, si, gem or pnn)");
}

double StrategyConfig::lambda() const {
  if (strength) return *strength;
  return kind == StrategyKind::ewc ? 100.0 : 1.0;
}

bool StrategyConfig::uses_buffer() const {
  return kind == StrategyKind::er || kind == StrategyKind::prospective || kind == StrategyKind::noise_aug;
}

void StrategyConfig::validate() const {
  if (strength && (!std::isfinite(*strength) || *strength < 0.0)) throw ConfigError("strategy: strength must be >= 0");
  if (!(si_xi > 0.0)) throw ConfigError("strategy: si_xi must be > 0");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) throw ConfigError("strategy: noise_level must be >= 0");
  if (capacity < 2) throw ConfigError("strategy: capacity must be >= 2");
  if (imagination_horizon < 1) throw ConfigError("strategy: imagination_horizon must be >= 1");
  if (kind == StrategyKind::ewc && fisher_samples < 1) throw ConfigError("strategy: fisher_samples must be >= 1");
  if (kind == StrategyKind::gem && gem_memory < 1) throw ConfigError("strategy: gem_memory must be >= 1");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !(dynamics_learning_rate > 0.0)) throw ConfigError("train: learning rates must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (max_epochs < 1 || dynamics_epochs < 1) throw ConfigError("train: epoch budgets must be >= 1");
}

}  // namespace foresight
