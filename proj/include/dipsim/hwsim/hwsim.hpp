#pragma once

// Flash/DRAM transfer simulator for sparse MLP inference.
//
// Non-MLP weights are pinned in DRAM and read once per token. The remaining
// DRAM is split evenly across MLP layers and caches neuron-bundle units; an
// active unit is read from DRAM on a hit and streamed from Flash on a miss.
// Latency is transfer time only: flash_bytes / flash_bw + dram_bytes / dram_bw.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dipsim/cache/cache.hpp"
#include "dipsim/core/predictor.hpp"
#include "dipsim/core/swiglu.hpp"
#include "dipsim/masking/schemes.hpp"
#include "dipsim/traces/trace.hpp"

namespace dipsim {

inline constexpr double kGB = 1e9;

struct HardwareConfig {
  double dram_capacity = 4.0 * kGB;    // bytes
  double dram_bandwidth = 60.0 * kGB;  // bytes / second
  double flash_bandwidth = 1.0 * kGB;  // bytes / second

  void validate() const;
};

struct ModelGeometry {
  Index num_layers = 1;
  Index d_model = 1;
  Index d_ff = 1;
  double bytes_per_weight = 0.5;
  double static_bytes = 0.0;

  void validate() const;
  double layer_mlp_bytes() const { return 3.0 * double(d_model) * double(d_ff) * bytes_per_weight; }
  double mlp_bytes() const { return double(num_layers) * layer_mlp_bytes(); }
  double total_bytes() const { return static_bytes + mlp_bytes(); }
};

/// One cacheable group of a layer under a given scheme.
struct GroupLayout {
  UnitGroup group = UnitGroup::IntermediateBundle;
  Index cardinality = 0;
  double unit_bytes = 0.0;
  bool always_active = false;  // matrix the scheme keeps dense
};

/// Partition of one layer's MLP bytes into unit groups for `scheme`.
std::vector<GroupLayout> unit_layout(const ModelGeometry& geo, Scheme scheme);

/// Byte size of one unit of `group` under `scheme`. Throws if the scheme has no such group.
double unit_bytes(const ModelGeometry& geo, UnitGroup group, Scheme scheme = Scheme::Dip);

/// Unit capacities for one layer's byte budget, split across groups in
/// proportion to their bytes (fractional units floor).
std::vector<Index> allocate_units(double budget_bytes, std::span<const GroupLayout> layout);

struct DramAllocation {
  double per_layer_bytes = 0.0;
  std::vector<std::vector<Index>> capacity;  // [layer][group]
};

/// Pins static bytes and splits the rest uniformly across layers. Throws
/// SimulationError when static bytes exceed DRAM.
DramAllocation allocate_dram(const HardwareConfig& hw, const ModelGeometry& geo, Scheme scheme = Scheme::Dip);

struct TokenCost {
  double flash_bytes = 0.0;
  double dram_bytes = 0.0;
  double latency = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bypassed = 0;
};

/// Caches for every (layer, group) of a run.
struct LayerCaches {
  std::vector<GroupLayout> layout;
  std::vector<std::vector<CacheState>> states;  // [layer][group]

  static LayerCaches make(const ModelGeometry& geo, Scheme scheme, const DramAllocation& alloc);
};

/// Active units of each group of one layer, in cache insertion priority order.
std::vector<std::vector<UnitId>> active_units(int layer, const MaskSet& masks, std::span<const GroupLayout> layout);

/// Charges one token: cache updates per layer, Flash bytes for misses, DRAM
/// bytes for hits plus the static weights. `policies[l][g]` selects the
/// eviction policy of each cache.
TokenCost simulate_token(LayerCaches& caches, std::span<const MaskSet> masks, const HardwareConfig& hw,
                         const ModelGeometry& geo, std::span<const std::vector<EvictionPolicy>> policies,
                         std::vector<AccessStats>* per_layer = nullptr);

struct SchemeConfig {
  Scheme scheme = Scheme::Dense;
  double input_density = 1.0;         // DIP / DIP-CA input pruning
  double intermediate_density = 1.0;  // every scheme that prunes the intermediate index
  double gamma = kDefaultGamma;
  CacheAwareTarget ca_target = CacheAwareTarget::Both;
  std::vector<double> cats_thresholds;  // per layer, CATS only
  bool predictor_oracle = false;        // Predictive scheme with |GLU| as logits

  void validate() const;
};

struct RunInputs {
  const ActivationTrace* trace = nullptr;
  const std::vector<MlpWeightsd>* weights = nullptr;   // required unless scheme is Dense without kernel eval
  const std::vector<Predictord>* predictors = nullptr;  // Predictive without oracle
  SchemeConfig scheme;
  PolicyKind policy = PolicyKind::Lfu;
  HardwareConfig hw;
  ModelGeometry geo;
  bool kernel_eval = false;
};

struct RunReport {
  std::vector<TokenCost> per_token;
  std::vector<AccessStats> per_layer;
  AccessStats totals;
  double total_latency = 0.0;
  double total_flash_bytes = 0.0;
  double total_dram_bytes = 0.0;
  double throughput = 0.0;  // tokens / total latency
  double hit_rate = 0.0;
  std::optional<double> mean_error;  // mean relative L2 output error, when kernel eval is on
  double static_bytes = 0.0;         // including predictor residency
  DramAllocation allocation;

  Index num_tokens() const { return static_cast<Index>(per_token.size()); }
};

/// Predictor bytes pinned in DRAM for predictive schemes.
double predictor_bytes(const std::vector<Predictord>& predictors, double bytes_per_weight);

/// Runs every token of the trace through masking, caching and transfer
/// accounting. Belady replays the cache-free access trace of a first pass and is
/// rejected for DIP-CA, whose masks depend on cache state.
RunReport simulate_run(const RunInputs& in);

struct SweepPoint {
  double density = 1.0;
  double throughput = 0.0;
  double error = 0.0;
  double gamma = kDefaultGamma;  // DIP-CA sweeps only
};

/// Highest-throughput point whose error is within `budget`; ties go to lower
/// error. Throws std::runtime_error when nothing is feasible.
SweepPoint throughput_at_error(std::span<const SweepPoint> sweep, double budget);

}  // namespace dipsim
