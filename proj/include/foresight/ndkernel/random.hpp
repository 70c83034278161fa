#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "foresight/ndkernel/tensor.hpp"

namespace foresight::nd {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream tags into an independent seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a, std::uint64_t tag_b);

double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean = 0.0, double stddev = 1.0);
std::size_t uniform_index(Rng& rng, std::size_t n);
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

/// Kaiming-uniform fan-in init: U(-b, b) with b = sqrt(6 / fan_in).
void kaiming_uniform(Tensor& w, std::size_t fan_in, Rng& rng);

}  // namespace foresight::nd
