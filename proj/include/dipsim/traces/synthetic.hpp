#pragma once

#include <cstdint>
#include <vector>

#include "dipsim/core/swiglu.hpp"
#include "dipsim/traces/trace.hpp"

namespace dipsim {

/// Heavy-tailed activation generator: each entry is a Rademacher sign times
/// exp(mu_l + sigma_l * N(0, 1)). `mu`/`sigma` hold one value per layer, or a
/// single value used for every layer.
struct SyntheticTraceSpec {
  Index num_tokens = 64;
  Index num_layers = 2;
  Index d_model = 64;
  Index d_ff = 256;
  std::vector<double> mu{0.0};
  std::vector<double> sigma{1.0};
  std::uint64_t seed = 0;

  void validate() const;
  double mu_at(Index layer) const;
  double sigma_at(Index layer) const;
};

/// Deterministic in the spec; values are rounded to binary32 so the in-memory
/// trace equals its file image.
ActivationTrace generate_synthetic_trace(const SyntheticTraceSpec& spec);

/// Gaussian weights with std 1/sqrt(fan_in), rounded to binary32.
std::vector<MlpWeightsd> generate_synthetic_weights(Index num_layers, Index d_model, Index d_ff, std::uint64_t seed);

}  // namespace dipsim
