#pragma once

// Per-layer DRAM cache over neuron-bundle units.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace dipsim {

using Index = Eigen::Index;

enum class UnitGroup : std::uint8_t { InputBundle, IntermediateBundle, DenseChunk };

std::string_view group_name(UnitGroup g);

/// Cacheable granule: one activation index of one group in one layer.
struct UnitId {
  int layer = 0;
  UnitGroup group = UnitGroup::IntermediateBundle;
  Index index = 0;

  friend bool operator==(const UnitId&, const UnitId&) = default;
};

struct AccessStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bypassed = 0;  // misses that could not be admitted

  std::uint64_t accesses() const { return hits + misses; }
  double hit_rate() const { return accesses() == 0 ? 0.0 : double(hits) / double(accesses()); }

  AccessStats& operator+=(const AccessStats& o) {
    hits += o.hits;
    misses += o.misses;
    bypassed += o.bypassed;
    return *this;
  }
  friend bool operator==(const AccessStats&, const AccessStats&) = default;
};

inline constexpr std::size_t kNeverUsed = std::numeric_limits<std::size_t>::max();

/// next[t][u]: position of the next access to unit u after position t, or
/// kNeverUsed. Defined for every unit accessed at t.
struct NextUseTable {
  std::vector<std::unordered_map<Index, std::size_t>> next;

  std::size_t next_use(std::size_t position, Index unit) const;
};

/// One backward pass over a trace of per-position access sets.
NextUseTable belady_precompute(std::span<const std::vector<Index>> trace);

enum class PolicyKind : std::uint8_t { Lfu, Lru, Belady, NoCache };

std::string_view policy_name(PolicyKind p);
/// Throws std::invalid_argument for unknown names.
PolicyKind parse_policy(std::string_view name);

struct EvictionPolicy {
  PolicyKind kind = PolicyKind::Lfu;
  const NextUseTable* next_use = nullptr;  // required for Belady; must cover the whole trace

  static EvictionPolicy lfu() { return {PolicyKind::Lfu, nullptr}; }
  static EvictionPolicy lru() { return {PolicyKind::Lru, nullptr}; }
  static EvictionPolicy none() { return {PolicyKind::NoCache, nullptr}; }
  static EvictionPolicy belady(const NextUseTable& table) { return {PolicyKind::Belady, &table}; }
};

/// Resident units of one (layer, group) with LFU/LRU metadata.
///
/// `clock` counts cache_update calls; the n-th call (0-based) uses position n,
/// which is also the trace position a Belady table is indexed by.
class CacheState {
 public:
  struct Entry {
    std::uint64_t freq = 0;
    std::size_t last_use = 0;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  CacheState() = default;
  CacheState(int layer, UnitGroup group, Index capacity_units);

  int layer() const { return layer_; }
  UnitGroup group() const { return group_; }
  Index capacity() const { return capacity_; }
  std::size_t clock() const { return clock_; }
  Index size() const { return static_cast<Index>(resident_.size()); }
  bool contains(Index unit) const { return resident_.contains(unit); }
  const std::unordered_map<Index, Entry>& resident() const { return resident_; }

  /// Resets residency and counters (LFU counts are per run).
  void clear();

  bool operator==(const CacheState&) const = default;

 private:
  friend AccessStats cache_update(CacheState&, std::span<const UnitId>, const EvictionPolicy&);
  friend Index belady_evict(const CacheState&, const NextUseTable&, std::size_t, std::span<const UnitId>);

  int layer_ = 0;
  UnitGroup group_ = UnitGroup::IntermediateBundle;
  Index capacity_ = 0;
  std::size_t clock_ = 0;
  std::unordered_map<Index, Entry> resident_;
};

/// Processes one token's accesses. `active` is in insertion priority order
/// (highest activation score first). Resident actives are hits; the rest are
/// misses, admitted while space remains or a resident unit outside `active`
/// can be evicted, and bypassed otherwise. Throws std::invalid_argument on a
/// unit from another layer or group.
AccessStats cache_update(CacheState& state, std::span<const UnitId> active, const EvictionPolicy& policy);

/// Resident unit outside `active` whose next use is farthest (never-used first,
/// then lower index). Throws std::logic_error when every resident unit is active.
Index belady_evict(const CacheState& state, const NextUseTable& table, std::size_t position,
                   std::span<const UnitId> active);

/// Bit i set iff unit i is resident; length `cardinality`.
Eigen::VectorXd resident_bitvector(const CacheState& state, Index cardinality);

/// Replays a single-group access trace through a fresh cache.
AccessStats replay_trace(std::span<const std::vector<Index>> trace, Index capacity, PolicyKind policy);

}  // namespace dipsim
