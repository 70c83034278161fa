#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "foresight/models/multitask_model.hpp"

namespace foresight {

enum class ProbeKind { linear, mlp };

std::string to_string(ProbeKind kind);
ProbeKind parse_probe_kind(const std::string& name);

struct ProbeConfig {
  ProbeKind kind = ProbeKind::linear;
  std::size_t hidden = 32;
  std::size_t epochs = 50;
  double learning_rate = 1e-2;
  std::size_t batch_size = 100;
  /// Share of the labelled samples used to fit the probe; the rest is held out.
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  void validate() const;
};

struct ProbeResult {
  double accuracy = 0.0;        // held-out
  double train_accuracy = 0.0;
  std::size_t classes = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  bool backbone_unchanged = true;
};

/// Fits a softmax (linear) or one-hidden-layer relu classifier with plain SGD on mean cross-entropy.
/// Features are standardised with statistics of the probe's training part.
ProbeResult probe_features(const nd::Tensor& features, std::span<const std::size_t> labels, const ProbeConfig& config);

/// Probes the frozen backbone representation of `windows` for the class in `labels`.
/// The backbone parameters are compared bit-for-bit before and after.
ProbeResult probe_train_eval(const MultiTaskModel& model, std::span<const Window> windows,
                             std::span<const std::size_t> labels, const ProbeConfig& config);

}  // namespace foresight
