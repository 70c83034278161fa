#include "foresight/models/backbone.hpp"

#include "foresight/errors.hpp"
#include "foresight/ndkernel/ops.hpp"

namespace foresight {

namespace ops = nd::ops;

std::string to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::linear: return "linear";
    case BackboneKind::mlp: return "mlp";
    case BackboneKind::tcn: return "tcn";
  }
  return "?";
}

BackboneKind parse_backbone_kind(const std::string& name) {
  if (name == "linear") return BackboneKind::linear;
  if (name == "mlp") return BackboneKind::mlp;
  if (name == "tcn") return BackboneKind::tcn;
  throw ConfigError("unknown backbone kind '" + name + "' (expected linear, mlp or tcn)");
}

std::size_t BackboneConfig::receptive_field() const {
  std::size_t rf = 1;
  for (std::size_t d : dilations) rf += (kernel_size - 1) * d;
  return rf;
}

void BackboneConfig::validate() const {
  if (window < 1) throw ConfigError("backbone: window must be >= 1");
  if (input_dim < 1) throw ConfigError("backbone: input_dim must be >= 1");
  switch (kind) {
    case BackboneKind::linear:
      if (output_width < 1) throw ConfigError("backbone: linear output_width must be >= 1");
      break;
    case BackboneKind::mlp:
      if (depth < 1 || hidden < 1 || output_width < 1) throw ConfigError("backbone: mlp needs depth, hidden, output_width >= 1");
      break;
    case BackboneKind::tcn:
      if (depth < 1 || hidden < 1 || kernel_size < 1) throw ConfigError("backbone: tcn needs depth, hidden, kernel_size >= 1");
      if (dilations.size() != depth) {
        throw ConfigError("backbone: tcn has " + std::to_string(depth) + " layers but " +
                          std::to_string(dilations.size()) + " dilations");
      }
      for (std::size_t d : dilations) {
        if (d < 1) throw ConfigError("backbone: dilation must be >= 1");
      }
      break;
  }
}

BackboneConfig BackboneConfig::default_for(BackboneKind kind, std::size_t input_dim, std::size_t window) {
  BackboneConfig c;
  c.kind = kind;
  c.input_dim = input_dim;
  c.window = window;
  switch (kind) {
    case BackboneKind::tcn:
      c.hidden = 32;
      c.depth = 3;
      c.kernel_size = 3;
      c.dilations = {1, 2, 4};
      c.output_width = c.hidden;
      break;
    case BackboneKind::linear:
      // 87 * (10*8) + 87 = 7047 parameters against 7008 for the default tcn.
      c.depth = 1;
      c.dilations.clear();
      c.output_width = 87;
      break;
    case BackboneKind::mlp:
      // 80*62 + 62 + 62*32 + 32 = 7038.
      c.depth = 2;
      c.hidden = 62;
      c.dilations.clear();
      c.output_width = 32;
      break;
  }
  return c;
}

Backbone::Backbone(BackboneConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nd::Rng rng(seed);
  const std::size_t flat = config_.window * config_.input_dim;
  switch (config_.kind) {
    case BackboneKind::linear:
      dense_.emplace_back(flat, config_.output_width, rng);
      break;
    case BackboneKind::mlp: {
      std::size_t in = flat;
      for (std::size_t l = 0; l + 1 < config_.depth; ++l) {
        dense_.emplace_back(in, config_.hidden, rng);
        in = config_.hidden;
      }
      dense_.emplace_back(in, config_.output_width, rng);
      break;
    }
    case BackboneKind::tcn: {
      std::size_t in = config_.input_dim;
      for (std::size_t l = 0; l < config_.depth; ++l) {
        conv_.emplace_back(config_.kernel_size, in, config_.hidden, config_.dilations[l], rng);
        in = config_.hidden;
      }
      break;
    }
  }
}

std::size_t Backbone::output_width() const {
  return config_.kind == BackboneKind::tcn ? config_.hidden : config_.output_width;
}

nd::Var Backbone::forward(Binding& bind, const nd::Var& windows) const {
  const nd::Shape& s = windows.shape();
  if (s.size() != 3 || s[1] != config_.window || s[2] != config_.input_dim) {
    throw ShapeError("backbone: expected windows [B," + std::to_string(config_.window) + "," +
                     std::to_string(config_.input_dim) + "], got " + nd::to_string(s));
  }
  if (config_.kind == BackboneKind::tcn) {
    nd::Var h = windows;
    for (const auto& layer : conv_) h = ops::relu(layer.forward(bind, h));
    return ops::last_step(h);
  }
  nd::Var h = ops::reshape(windows, nd::Shape{s[0], s[1] * s[2]});
  if (config_.kind == BackboneKind::linear) return dense_.front().forward(bind, h);
  for (const auto& layer : dense_) h = ops::relu(layer.forward(bind, h));
  return h;
}

void Backbone::collect(ParamRefs& out, const std::string& prefix) {
  for (std::size_t i = 0; i < dense_.size(); ++i) dense_[i].collect(out, prefix + ".dense" + std::to_string(i));
  for (std::size_t i = 0; i < conv_.size(); ++i) conv_[i].collect(out, prefix + ".conv" + std::to_string(i));
}

std::size_t Backbone::parameter_count() const {
  std::size_t n = 0;
  for (const auto& d : dense_) n += d.weight.size() + d.bias.size();
  for (const auto& c : conv_) n += c.kernel.size() + c.bias.size();
  return n;
}

}  // namespace foresight
