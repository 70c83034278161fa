#pragma once

#include <cstddef>
#include <string>

#include "foresight/models/parameters.hpp"
#include "foresight/ndkernel/random.hpp"

namespace foresight {

/// Fully connected layer x[B,in] -> x W + b.
struct Dense {
  Dense() = default;
  Dense(std::size_t in, std::size_t out, nd::Rng& rng);

  nd::Var forward(Binding& bind, const nd::Var& x) const;
  void collect(ParamRefs& out, const std::string& prefix);
  std::size_t in() const { return weight.dim(0); }
  std::size_t out() const { return weight.dim(1); }

  nd::Tensor weight;  // [in, out]
  nd::Tensor bias;    // [out]
};

/// Causal dilated temporal convolution layer.
struct TemporalConv {
  TemporalConv() = default;
  TemporalConv(std::size_t kernel_size, std::size_t in, std::size_t out, std::size_t dilation, nd::Rng& rng);

  nd::Var forward(Binding& bind, const nd::Var& x) const;
  void collect(ParamRefs& out, const std::string& prefix);

  nd::Tensor kernel;  // [k, in, out]
  nd::Tensor bias;    // [out]
  std::size_t dilation = 1;
};

}  // namespace foresight
