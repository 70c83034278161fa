#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "foresight/models/layers.hpp"

namespace foresight {

enum class BackboneKind { linear, mlp, tcn };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(const std::string& name);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::tcn;
  std::size_t input_dim = 8;
  std::size_t window = 10;
  /// tcn: channels; mlp: width of the hidden layers.
  std::size_t hidden = 32;
  /// tcn: conv layers; mlp: dense layers including the output layer.
  std::size_t depth = 3;
  std::size_t kernel_size = 3;
  std::vector<std::size_t> dilations{1, 2, 4};
  /// Feature width for linear/mlp. A tcn emits `hidden` features.
  std::size_t output_width = 32;

  /// Number of past steps that can influence the last output of a tcn (1 + sum (k-1)*dilation).
  std::size_t receptive_field() const;
  void validate() const;

  static BackboneConfig default_for(BackboneKind kind, std::size_t input_dim = 8, std::size_t window = 10);
};

/// Shared feature extractor f^s: windows [B,T,d] -> features [B,F].
class Backbone {
 public:
  Backbone() = default;
  Backbone(BackboneConfig config, std::uint64_t seed);

  nd::Var forward(Binding& bind, const nd::Var& windows) const;
  std::size_t output_width() const;
  const BackboneConfig& config() const noexcept { return config_; }
  void collect(ParamRefs& out, const std::string& prefix = "backbone");
  std::size_t parameter_count() const;

 private:
  BackboneConfig config_;
  std::vector<Dense> dense_;
  std::vector<TemporalConv> conv_;
};

}  // namespace foresight
