#pragma once

#include <span>
#include <vector>

#include "dipsim/core/swiglu.hpp"
#include "dipsim/hwsim/hwsim.hpp"
#include "dipsim/masking/threshold.hpp"
#include "dipsim/traces/trace.hpp"

namespace dipsim {

/// Threshold t such that keeping |v| >= t retains about `density` of `values`
/// (the empirical (1 - density) quantile of the magnitudes). density 1 gives 0.
double quantile_threshold(std::vector<double> magnitudes, double density);

/// Per-layer thresholds on MLP input magnitudes, pooled over all tokens.
PerLayerThreshold calibrate_per_layer_thresholds(const ActivationTrace& trace, double target_density);

/// One threshold pooled over every layer and token.
GlobalThreshold calibrate_global_threshold(const ActivationTrace& trace, double target_density);

/// Per-layer thresholds on |silu(W_gate x)|, for the CATS scheme.
std::vector<double> calibrate_gate_thresholds(const ActivationTrace& trace, const std::vector<MlpWeightsd>& weights,
                                              double target_density);

/// Mean kept fraction per layer after applying `spec` to every token.
std::vector<double> per_layer_density(const ActivationTrace& trace, const ThresholdSpec& spec);

struct GammaSweepRow {
  double gamma = 0.0;
  double density = 0.0;
  double throughput = 0.0;
  double hit_rate = 0.0;
  std::optional<double> error;
};

/// DIP-CA over the full (gamma, density) grid; density applies to both
/// prunings. `base` supplies trace, weights, policy, hardware and geometry.
/// Rows are ordered gamma-major. Grid points run on up to `threads` threads.
std::vector<GammaSweepRow> gamma_sweep(const RunInputs& base, std::span<const double> gammas,
                                       std::span<const double> densities, unsigned threads = 1);

}  // namespace dipsim
