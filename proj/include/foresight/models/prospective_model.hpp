#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "foresight/models/layers.hpp"

namespace foresight {

struct ProspectiveConfig {
  std::size_t state_dim = 8;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;
};

/// Forward-dynamics model g_t: (x_k, y_k) -> x_{k+1}, an MLP (d+1) -> hidden -> d with relu.
class ProspectiveModel {
 public:
  ProspectiveModel() = default;
  explicit ProspectiveModel(ProspectiveConfig config);

  /// inputs [B, d+1] (state followed by the output) -> next states [B, d]
  nd::Var forward(Binding& bind, const nd::Var& inputs) const;

  /// x_hat_{k+1} = g(x_k, y)
  std::vector<double> prospect(std::span<const double> state, double output) const;
  /// states [B,d], outputs [B] -> [B,d]
  nd::Tensor prospect_batch(const nd::Tensor& states, std::span<const double> outputs) const;

  std::size_t state_dim() const noexcept { return config_.state_dim; }
  const ProspectiveConfig& config() const noexcept { return config_; }
  ParamRefs parameters();

  Dense hidden;
  Dense output;

 private:
  ProspectiveConfig config_;
};

/// Packs states [B,d] and outputs [B] into the model input [B,d+1].
nd::Tensor prospective_inputs(const nd::Tensor& states, std::span<const double> outputs);

}  // namespace foresight
