#include "foresight/cli/experiment_config.hpp"

#include <fstream>
#include <set>

#include "foresight/errors.hpp"

namespace foresight::cli {

using nlohmann::json;

std::string to_string(Regime regime) { return regime == Regime::joint ? "joint" : "task_incremental"; }

Regime parse_regime(const std::string& name) {
  if (name == "task_incremental") return Regime::task_incremental;
  if (name == "joint") return Regime::joint;
  throw ConfigError("unknown regime '" + name + "' (expected task_incremental or joint)");
}

namespace {

// Reads members of one object and remembers which keys were used.
class Object {
 public:
  Object(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

template <class E, class Parse>
void get_enum(Object& o, const char* key, E& out, Parse parse) {
  std::string name;
  o.get(key, name);
  if (!name.empty()) {
    try {
      out = parse(name);
    } catch (const Error& e) {
      throw ConfigError(o.path(key) + ": " + e.what());
    }
  }
}

template <class E, class Parse>
void get_enum_list(Object& o, const char* key, std::vector<E>& out, Parse parse) {
  std::vector<std::string> names;
  if (!o.child(key)) return;
  o.get(key, names);
  out.clear();
  for (const auto& n : names) {
    try {
      out.push_back(parse(n));
    } catch (const Error& e) {
      throw ConfigError(o.path(key) + ": " + e.what());
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return std::filesystem::absolute(path.is_relative() && !base.empty() ? base / path : path);
}

template <class T>
std::vector<std::string> names_of(const std::vector<T>& v) {
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(to_string(x));
  return out;
}

std::vector<std::string> path_strings(const std::vector<std::filesystem::path>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(p.string());
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema != kConfigSchema) throw ConfigError("config schema " + std::to_string(schema) + " is not supported");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (regimes.empty()) throw ConfigError("regimes: at least one regime is required");
  const bool incremental = std::find(regimes.begin(), regimes.end(), Regime::task_incremental) != regimes.end();
  const bool joint = std::find(regimes.begin(), regimes.end(), Regime::joint) != regimes.end();
  if (incremental && strategies.empty()) throw ConfigError("strategies: at least one strategy is required");
  if (joint && joint_modes.empty()) throw ConfigError("joint_modes: at least one mode is required for the joint regime");
  if (!suite.kind && suite.csv.empty()) throw ConfigError("suite: give a synthetic kind or csv task files");
  if (suite.kind && !suite.csv.empty()) throw ConfigError("suite: kind and csv are mutually exclusive");
  if (!suite.csv_test.empty() && suite.csv_test.size() != suite.csv.size()) {
    throw ConfigError("suite.csv_test must list one file per csv task");
  }
  for (const auto* list : {&suite.csv, &suite.csv_test}) {
    for (const auto& p : *list) {
      std::ifstream in(p);
      if (!in) throw ConfigError("suite: cannot read '" + p.string() + "'");
    }
  }
  if (suite.test_samples < 2 * backbone.window) throw ConfigError("suite.test_samples too small for the window");
  const std::size_t suite_size =
      suite.kind ? (*suite.kind == SuiteKind::embry_like ? 9 : 5) : suite.csv.size();
  std::vector<bool> seen(suite_size, false);
  for (std::size_t p : suite.order) {
    if (p >= suite_size) throw ConfigError("suite.order: position " + std::to_string(p) + " is outside the suite");
    if (seen[p]) throw ConfigError("suite.order: position " + std::to_string(p) + " repeated");
    seen[p] = true;
  }
  if (head_hidden == 0) throw ConfigError("head_hidden must be positive");
  try {
    backbone.validate();
    train.validate();
    for (auto kind : strategies) {
      StrategyConfig s = strategy;
      s.kind = kind;
      s.validate();
    }
    if (evaluation.lyapunov) evaluation.embedding.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (suite.kind && backbone.input_dim != suite.options.input_dim) {
    throw ConfigError("backbone.input_dim must equal suite.input_dim");
  }
  const auto& sw = evaluation.shift_sweep;
  if (sw.enabled) {
    if (sw.magnitudes.size() < 5) throw ConfigError("evaluation.shift_sweep needs at least 5 magnitudes");
    if (sw.kinds.empty()) throw ConfigError("evaluation.shift_sweep.kinds is empty");
    for (double m : sw.magnitudes)
      if (!(m >= 0.0)) throw ConfigError("evaluation.shift_sweep: magnitudes must be >= 0");
    if (!suite.kind) throw ConfigError("evaluation.shift_sweep needs a synthetic suite (latent state)");
    for (const auto& name : {sw.conventional, sw.prospective}) {
      const auto kind = parse_strategy_kind(name);
      if (std::find(strategies.begin(), strategies.end(), kind) == strategies.end()) {
        throw ConfigError("evaluation.shift_sweep: strategy '" + name + "' is not in strategies");
      }
    }
  }
  for (double t : evaluation.taus)
    if (!(t >= 0.0)) throw ConfigError("evaluation.taus must be >= 0");
  for (double l : evaluation.noise_levels)
    if (!(l >= 0.0)) throw ConfigError("evaluation.noise_levels must be >= 0");
  if (evaluation.closed_loop && (evaluation.closed_loop_horizon == 0 || evaluation.closed_loop_starts == 0)) {
    throw ConfigError("evaluation.closed_loop horizon and starts must be positive");
  }
  if (evaluation.closed_loop && !train.always_train_dynamics) {
    for (auto kind : strategies) {
      if (kind != StrategyKind::prospective) {
        throw ConfigError("evaluation.closed_loop needs train.always_train_dynamics for strategy " + to_string(kind));
      }
    }
  }
  if (evaluation.probe && evaluation.probe_epochs == 0) throw ConfigError("evaluation.probe_epochs must be positive");
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base) {
  ExperimentConfig c;
  Object root(j, "config");
  root.get("schema", c.schema);
  root.get("name", c.name);

  if (const json* s = root.child("suite")) {
    Object o(*s, "suite");
    std::string kind;
    o.get("kind", kind);
    std::vector<std::string> csv, csv_test;
    o.get("csv", csv);
    o.get("csv_test", csv_test);
    if (!csv.empty()) c.suite.kind.reset();
    if (!kind.empty()) {
      try {
        c.suite.kind = parse_suite_kind(kind);
      } catch (const Error& e) {
        throw ConfigError(std::string("suite.kind: ") + e.what());
      }
    }
    for (const auto& p : csv) c.suite.csv.push_back(resolve(base, p));
    for (const auto& p : csv_test) c.suite.csv_test.push_back(resolve(base, p));
    o.get("input_dim", c.suite.options.input_dim);
    o.get("samples", c.suite.options.samples);
    o.get("noise", c.suite.options.noise);
    o.get("dt", c.suite.options.dt);
    o.get("trials", c.suite.options.trials);
    o.get("phase_jitter", c.suite.options.phase_jitter);
    o.get("test_samples", c.suite.test_samples);
    o.get("order", c.suite.order);
    o.finish();
  }
  get_enum_list(root, "regimes", c.regimes, parse_regime);
  get_enum_list(root, "strategies", c.strategies, parse_strategy_kind);
  get_enum_list(root, "joint_modes", c.joint_modes, parse_joint_mode);
  get_enum(root, "head_mode", c.head_mode, parse_head_mode);

  if (const json* b = root.child("backbone")) {
    Object o(*b, "backbone");
    std::string kind;
    o.get("kind", kind);
    if (!kind.empty()) {
      try {
        c.backbone = BackboneConfig::default_for(parse_backbone_kind(kind), c.suite.options.input_dim);
      } catch (const Error& e) {
        throw ConfigError(std::string("backbone.kind: ") + e.what());
      }
    } else {
      c.backbone.input_dim = c.suite.options.input_dim;
    }
    o.get("input_dim", c.backbone.input_dim);
    o.get("window", c.backbone.window);
    o.get("hidden", c.backbone.hidden);
    o.get("depth", c.backbone.depth);
    o.get("kernel_size", c.backbone.kernel_size);
    o.get("dilations", c.backbone.dilations);
    o.get("output_width", c.backbone.output_width);
    o.finish();
  } else {
    c.backbone.input_dim = c.suite.options.input_dim;
  }
  root.get("head_hidden", c.head_hidden);
  root.get("seeds", c.seeds);

  if (const json* s = root.child("strategy")) {
    Object o(*s, "strategy");
    if (o.child("strength")) {
      double v = 0.0;
      o.get("strength", v);
      c.strategy.strength = v;
    }
    o.get("si_xi", c.strategy.si_xi);
    o.get("fisher_samples", c.strategy.fisher_samples);
    o.get("gem_memory", c.strategy.gem_memory);
    o.get("noise_level", c.strategy.noise_level);
    o.get("capacity", c.strategy.capacity);
    o.get("imagination_horizon", c.strategy.imagination_horizon);
    o.finish();
  }
  if (const json* t = root.child("train")) {
    Object o(*t, "train");
    o.get("batch_size", c.train.batch_size);
    o.get("rehearsal_batch", c.train.rehearsal_batch);
    o.get("learning_rate", c.train.learning_rate);
    o.get("momentum", c.train.momentum);
    o.get("max_epochs", c.train.max_epochs);
    o.get("patience", c.train.patience);
    o.get("dynamics_epochs", c.train.dynamics_epochs);
    o.get("dynamics_learning_rate", c.train.dynamics_learning_rate);
    o.get("always_train_dynamics", c.train.always_train_dynamics);
    o.finish();
  }
  if (const json* d = root.child("dynamics")) {
    Object o(*d, "dynamics");
    o.get("hidden", c.dynamics.hidden);
    o.finish();
  }
  if (const json* e = root.child("evaluation")) {
    Object o(*e, "evaluation");
    auto& ev = c.evaluation;
    if (const json* s = o.child("shift_sweep")) {
      if (s->is_boolean()) {
        ev.shift_sweep.enabled = s->get<bool>();
      } else {
        Object so(*s, "evaluation.shift_sweep");
        ev.shift_sweep.enabled = true;
        so.get("enabled", ev.shift_sweep.enabled);
        get_enum_list(so, "kinds", ev.shift_sweep.kinds, parse_shift_kind);
        so.get("magnitudes", ev.shift_sweep.magnitudes);
        so.get("conventional", ev.shift_sweep.conventional);
        so.get("prospective", ev.shift_sweep.prospective);
        so.finish();
      }
    }
    o.get("fgsm", ev.fgsm);
    o.get("taus", ev.taus);
    o.get("noise", ev.noise);
    o.get("noise_levels", ev.noise_levels);
    o.get("probe", ev.probe);
    get_enum_list(o, "probe_kinds", ev.probe_kinds, parse_probe_kind);
    o.get("probe_epochs", ev.probe_epochs);
    o.get("lyapunov", ev.lyapunov);
    if (const json* l = o.child("embedding")) {
      Object lo(*l, "evaluation.embedding");
      lo.get("dimension", ev.embedding.dimension);
      lo.get("delay", ev.embedding.delay);
      lo.get("neighbors", ev.embedding.neighbors);
      lo.get("radius", ev.embedding.radius);
      lo.get("matrix_dimension", ev.embedding.matrix_dimension);
      lo.get("singular_cutoff", ev.embedding.singular_cutoff);
      lo.get("evolution", ev.embedding.evolution);
      lo.finish();
    }
    o.get("closed_loop", ev.closed_loop);
    o.get("closed_loop_horizon", ev.closed_loop_horizon);
    o.get("closed_loop_starts", ev.closed_loop_starts);
    o.finish();
  }
  std::string out;
  root.get("output", out);
  if (!out.empty()) c.output = out;
  root.finish();
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = c.schema;
  j["name"] = c.name;
  json suite;
  if (c.suite.kind) suite["kind"] = to_string(*c.suite.kind);
  if (!c.suite.csv.empty()) suite["csv"] = path_strings(c.suite.csv);
  if (!c.suite.csv_test.empty()) suite["csv_test"] = path_strings(c.suite.csv_test);
  suite["input_dim"] = c.suite.options.input_dim;
  suite["samples"] = c.suite.options.samples;
  suite["noise"] = c.suite.options.noise;
  suite["dt"] = c.suite.options.dt;
  suite["trials"] = c.suite.options.trials;
  suite["phase_jitter"] = c.suite.options.phase_jitter;
  suite["test_samples"] = c.suite.test_samples;
  suite["order"] = c.suite.order;
  j["suite"] = suite;
  j["regimes"] = names_of(c.regimes);
  j["strategies"] = names_of(c.strategies);
  j["joint_modes"] = names_of(c.joint_modes);
  j["head_mode"] = to_string(c.head_mode);
  j["backbone"] = {{"kind", to_string(c.backbone.kind)},       {"input_dim", c.backbone.input_dim},
                   {"window", c.backbone.window},              {"hidden", c.backbone.hidden},
                   {"depth", c.backbone.depth},                {"kernel_size", c.backbone.kernel_size},
                   {"dilations", c.backbone.dilations},        {"output_width", c.backbone.output_width}};
  j["head_hidden"] = c.head_hidden;
  j["seeds"] = c.seeds;
  json s = {{"si_xi", c.strategy.si_xi},
            {"fisher_samples", c.strategy.fisher_samples},
            {"gem_memory", c.strategy.gem_memory},
            {"noise_level", c.strategy.noise_level},
            {"capacity", c.strategy.capacity},
            {"imagination_horizon", c.strategy.imagination_horizon}};
  if (c.strategy.strength) s["strength"] = *c.strategy.strength;
  j["strategy"] = s;
  j["train"] = {{"batch_size", c.train.batch_size},
                {"rehearsal_batch", c.train.rehearsal_batch},
                {"learning_rate", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"dynamics_epochs", c.train.dynamics_epochs},
                {"dynamics_learning_rate", c.train.dynamics_learning_rate},
                {"always_train_dynamics", c.train.always_train_dynamics}};
  j["dynamics"] = {{"hidden", c.dynamics.hidden}};
  const auto& ev = c.evaluation;
  j["evaluation"] = {
      {"shift_sweep",
       {{"enabled", ev.shift_sweep.enabled},
        {"kinds", names_of(ev.shift_sweep.kinds)},
        {"magnitudes", ev.shift_sweep.magnitudes},
        {"conventional", ev.shift_sweep.conventional},
        {"prospective", ev.shift_sweep.prospective}}},
      {"fgsm", ev.fgsm},
      {"taus", ev.taus},
      {"noise", ev.noise},
      {"noise_levels", ev.noise_levels},
      {"probe", ev.probe},
      {"probe_kinds", names_of(ev.probe_kinds)},
      {"probe_epochs", ev.probe_epochs},
      {"lyapunov", ev.lyapunov},
      {"embedding",
       {{"dimension", ev.embedding.dimension},
        {"delay", ev.embedding.delay},
        {"neighbors", ev.embedding.neighbors},
        {"radius", ev.embedding.radius},
        {"matrix_dimension", ev.embedding.matrix_dimension},
        {"singular_cutoff", ev.embedding.singular_cutoff},
        {"evolution", ev.embedding.evolution}}},
      {"closed_loop", ev.closed_loop},
      {"closed_loop_horizon", ev.closed_loop_horizon},
      {"closed_loop_starts", ev.closed_loop_starts}};
  j["output"] = c.output.string();
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace foresight::cli
