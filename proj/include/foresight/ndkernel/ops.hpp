#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "foresight/ndkernel/tape.hpp"

// Differentiable primitives. Each validates shapes (ShapeError naming the op),
// rejects non-finite results (NumericError) and records itself on the operands' tape.
namespace foresight::nd::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// a[..., n] + bias[n]
Var add_bias(const Var& a, const Var& bias);
/// a[m,k] x b[k,n]
Var matmul(const Var& a, const Var& b);
Var relu(const Var& a);
Var tanh(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var reshape(const Var& a, Shape shape);

/// Causal dilated convolution. input [T,Cin] or [B,T,Cin], kernel [k,Cin,Cout].
/// Kernel tap j reads input step t - (k-1-j)*dilation (left zero padding), so tap k-1 is the current step.
Var conv1d_causal(const Var& input, const Var& kernel, std::size_t dilation);

/// x[B,T,C] -> x[:, T-1, :] as [B,C]
Var last_step(const Var& x);
/// Rows of a[N, ...] selected by `rows`.
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
/// Concatenation along the leading axis.
Var concat_rows(std::span<const Var> parts);

/// sum_i (pred_i - target_i)^2; pred may be [B] or [B,1] against target [B].
Var sum_squared_error(const Var& pred, const Tensor& target);
/// sum_i w_i (theta_i - anchor_i)^2
Var weighted_squared_distance(const Var& theta, const Tensor& anchor, const Tensor& weights);
/// Summed cross-entropy of softmax(logits[B,C]) against class labels.
Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> labels);

}  // namespace foresight::nd::ops
