#include "foresight/models/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "foresight/errors.hpp"

namespace foresight {

using nlohmann::json;

namespace {

json tensor_json(const nd::Tensor& t) {
  return json{{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

nd::Tensor tensor_from(const json& j) {
  return nd::Tensor(j.at("shape").get<nd::Shape>(), j.at("data").get<std::vector<double>>());
}

json params_json(const ParamRefs& params) {
  json out = json::object();
  for (const auto& p : params) out[p.name] = tensor_json(*p.tensor);
  return out;
}

void load_params(const ParamRefs& params, const json& j) {
  for (const auto& p : params) {
    if (!j.contains(p.name)) throw DataError("checkpoint: missing parameter " + p.name);
    nd::Tensor t = tensor_from(j.at(p.name));
    if (t.shape() != p.tensor->shape()) throw DataError("checkpoint: shape mismatch for " + p.name);
    *p.tensor = std::move(t);
  }
}

json backbone_json(const BackboneConfig& c) {
  return json{{"kind", to_string(c.kind)}, {"input_dim", c.input_dim},     {"window", c.window},
              {"hidden", c.hidden},        {"depth", c.depth},             {"kernel_size", c.kernel_size},
              {"dilations", c.dilations},  {"output_width", c.output_width}};
}

BackboneConfig backbone_from(const json& j) {
  BackboneConfig c;
  c.kind = parse_backbone_kind(j.at("kind").get<std::string>());
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.dilations = j.at("dilations").get<std::vector<std::size_t>>();
  c.output_width = j.at("output_width").get<std::size_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& cp) {
  MultiTaskModel model = cp.model;
  const ModelConfig& mc = model.config();
  json j;
  j["format"] = "foresight-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = {{"backbone", backbone_json(mc.backbone)},
                {"head_hidden", mc.head_hidden},
                {"head_mode", to_string(mc.head_mode)},
                {"seed", mc.seed}};
  json tasks = json::array();
  for (TaskId t : model.tasks()) tasks.push_back(t.value);
  j["tasks"] = tasks;
  j["parameters"] = params_json(model.parameters());
  json pros = json::array();
  for (const auto& [task, g] : cp.prospective) {
    ProspectiveModel gm = g;
    pros.push_back({{"task", task.value},
                    {"state_dim", gm.config().state_dim},
                    {"hidden", gm.config().hidden},
                    {"seed", gm.config().seed},
                    {"parameters", params_json(gm.parameters())}});
  }
  j["prospective"] = pros;
  return j.dump(1);
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.value("format", "") != "foresight-checkpoint") throw DataError("checkpoint: not a foresight checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const json& m = j.at("model");
    ModelConfig mc;
    mc.backbone = backbone_from(m.at("backbone"));
    mc.head_hidden = m.at("head_hidden").get<std::size_t>();
    mc.head_mode = parse_head_mode(m.at("head_mode").get<std::string>());
    mc.seed = m.at("seed").get<std::uint64_t>();
    Checkpoint cp{MultiTaskModel(mc), {}};
    if (mc.head_mode == HeadMode::task_specific) {
      for (const auto& t : j.at("tasks")) cp.model.add_task_head(TaskId{t.get<std::uint32_t>()});
    }
    load_params(cp.model.parameters(), j.at("parameters"));
    for (const auto& p : j.at("prospective")) {
      ProspectiveConfig pc{p.at("state_dim").get<std::size_t>(), p.at("hidden").get<std::size_t>(),
                           p.at("seed").get<std::uint64_t>()};
      ProspectiveModel g(pc);
      load_params(g.parameters(), p.at("parameters"));
      cp.prospective.emplace(TaskId{p.at("task").get<std::uint32_t>()}, std::move(g));
    }
    return cp;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  out << checkpoint_to_string(cp);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace foresight
