#pragma once

// Mask generation for each sparsification scheme. All functions are pure:
// cache residency comes in as explicit 0/1 vectors.

#include <cstdint>

#include <Eigen/Core>

#include "dipsim/core/predictor.hpp"
#include "dipsim/core/swiglu.hpp"
#include "dipsim/masking/mask.hpp"

namespace dipsim {

using Eigen::VectorXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// Default cache-aware penalty for uncached units.
inline constexpr double kDefaultGamma = 0.2;

struct CacheAwareParams {
  double gamma = kDefaultGamma;
  void validate() const;
};

/// Which DIP prunings use cache-aware scores.
enum class CacheAwareTarget : std::uint8_t { Input, Intermediate, Both };

/// Intermediate top-k on |GLU(x)| computed densely; input untouched.
MaskSet scheme_glu_pruning(const MlpWeightsd& w, const VecRef& x, Index k_mid);

/// Intermediate top-k on |silu(W_gate x)|; gate itself stays dense.
MaskSet scheme_gate_pruning(const MlpWeightsd& w, const VecRef& x, Index k_mid);

/// Gate pruning with a magnitude threshold on |silu(W_gate x)| instead of top-k.
MaskSet scheme_cats(const MlpWeightsd& w, const VecRef& x, double threshold);

/// Intermediate top-k on |W_up x|; up itself stays dense.
MaskSet scheme_up_pruning(const MlpWeightsd& w, const VecRef& x, Index k_mid);

/// Intermediate top-k on predictor logits; prunes up, gate and down.
MaskSet scheme_predictive(const Predictord& p, const VecRef& x, Index k_mid);

/// Predictive scheme with the true |GLU(x)| standing in for the logits.
MaskSet scheme_predictive_oracle(const MlpWeightsd& w, const VecRef& x, Index k_mid);

/// Input top-k on |x|, then intermediate top-k on the GLU computed from the
/// kept input columns only.
MaskSet scheme_dip(const MlpWeightsd& w, const VecRef& x, Index k_in, Index k_mid);

/// s = |x| * (c + gamma * (1 - c)) / max|x|. All zeros when x is zero.
VectorXd dip_ca_scores(const VecRef& x, const VecRef& cached, double gamma);

/// DIP with cache-aware re-weighting of the selected prunings.
MaskSet scheme_dip_ca(const MlpWeightsd& w, const VecRef& x, const VecRef& cached_input,
                      const VecRef& cached_intermediate, Index k_in, Index k_mid, CacheAwareParams params,
                      CacheAwareTarget target = CacheAwareTarget::Both);

}  // namespace dipsim
