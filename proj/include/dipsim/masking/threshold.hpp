#pragma once

#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dipsim/masking/mask.hpp"

namespace dipsim {

struct GlobalThreshold {
  double t = 0.0;
};
struct PerLayerThreshold {
  std::vector<double> t;
};
struct PerTokenDensity {
  double density = 1.0;
};

using ThresholdSpec = std::variant<GlobalThreshold, PerLayerThreshold, PerTokenDensity>;

/// Throws std::invalid_argument on negative thresholds or density outside (0, 1].
void validate(const ThresholdSpec& spec);

/// Global / per-layer: keep |v_i| >= t. Per-token: top-k with k from the density.
SparsityMask apply_threshold(const Eigen::Ref<const Eigen::VectorXd>& v, const ThresholdSpec& spec,
                             std::size_t layer);

}  // namespace dipsim
