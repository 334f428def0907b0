#pragma once

// Calibration of how a target MLP density splits between the input pruning
// (up and gate columns, shared density) and the intermediate pruning (down
// columns): sweep, Pareto filter, then an affine fit in logit space.

#include <span>
#include <utility>
#include <vector>

#include "dipsim/core/swiglu.hpp"

namespace dipsim {

struct DensityPoint {
  double input_density = 1.0;         // up and gate
  double intermediate_density = 1.0;  // down
  double memory = 1.0;                // fraction of MLP bytes loaded per token
  double error = 0.0;                 // mean relative L2 output error
};

/// Fraction of MLP weights a DIP mask with k_in inputs and k_mid intermediates reads.
double dip_memory_fraction(Index k_in, Index k_mid, Index d_model, Index d_ff);

/// Runs DIP at every (intermediate, input) density pair over the columns of
/// `inputs` (d_model x N). Grid entries are (down density, up/gate density).
std::vector<DensityPoint> sweep_density_allocation(const MlpWeightsd& w, const Eigen::MatrixXd& inputs,
                                                   std::span<const std::pair<double, double>> grid,
                                                   unsigned threads = 1);

/// Non-dominated points (lower memory and lower error), sorted by memory.
std::vector<DensityPoint> pareto_front(std::span<const DensityPoint> points);

inline constexpr double kLogitClampLo = 0.001;
inline constexpr double kLogitClampHi = 0.999;

double logit(double p);
double inv_logit(double z);

struct AllocationModel {
  // logit(component density) = intercept + slope * logit(target MLP density)
  double input_slope = 1.0;
  double input_intercept = 0.0;
  double intermediate_slope = 1.0;
  double intermediate_intercept = 0.0;

  /// (input density, intermediate density), each clamped to [0.001, 0.999].
  std::pair<double, double> predict(double target) const;
};

/// Least squares in logit space, using each point's memory as the target
/// density. Needs >= 2 points with distinct memory.
AllocationModel fit_logit_linear(std::span<const DensityPoint> points);

/// Fit on front points with both densities below 1. Saturated points sit at
/// the logit clamp and would drag the slopes; falls back to all points when
/// fewer than two interior points with distinct memory remain.
AllocationModel fit_allocation_model(std::span<const DensityPoint> front);

struct Allocation {
  Index k_in = 0;
  Index k_mid = 0;
  double input_density = 0.0;
  double intermediate_density = 0.0;
  double memory = 0.0;  // realized MLP memory fraction
};

/// Densities from the model turned into integer k's; target must be in (0, 1).
Allocation optimal_allocation(const AllocationModel& model, double target, Index d_model, Index d_ff);

}  // namespace dipsim
