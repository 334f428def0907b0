#include "dipsim/cache/cache.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace dipsim {

std::string_view group_name(UnitGroup g) {
  switch (g) {
    case UnitGroup::InputBundle:
      return "input_bundle";
    case UnitGroup::IntermediateBundle:
      return "intermediate_bundle";
    case UnitGroup::DenseChunk:
      return "dense_matrix_chunk";
  }
  return "unknown";
}

std::string_view policy_name(PolicyKind p) {
  switch (p) {
    case PolicyKind::Lfu:
      return "lfu";
    case PolicyKind::Lru:
      return "lru";
    case PolicyKind::Belady:
      return "belady";
    case PolicyKind::NoCache:
      return "none";
  }
  return "unknown";
}

PolicyKind parse_policy(std::string_view name) {
  for (auto p : {PolicyKind::Lfu, PolicyKind::Lru, PolicyKind::Belady, PolicyKind::NoCache})
    if (policy_name(p) == name) return p;
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

std::size_t NextUseTable::next_use(std::size_t position, Index unit) const {
  if (position >= next.size()) throw std::logic_error("NextUseTable: position beyond trace");
  const auto& row = next[position];
  const auto it = row.find(unit);
  if (it == row.end()) throw std::logic_error("NextUseTable: unit not accessed at position");
  return it->second;
}

NextUseTable belady_precompute(std::span<const std::vector<Index>> trace) {
  NextUseTable table;
  table.next.resize(trace.size());
  std::unordered_map<Index, std::size_t> upcoming;
  for (std::size_t t = trace.size(); t-- > 0;) {
    auto& row = table.next[t];
    for (Index u : trace[t]) {
      const auto it = upcoming.find(u);
      row[u] = it == upcoming.end() ? kNeverUsed : it->second;
    }
    for (Index u : trace[t]) upcoming[u] = t;
  }
  return table;
}

CacheState::CacheState(int layer, UnitGroup group, Index capacity_units)
    : layer_(layer), group_(group), capacity_(capacity_units) {
  if (capacity_units < 0) throw std::invalid_argument("CacheState: negative capacity");
}

void CacheState::clear() {
  resident_.clear();
  clock_ = 0;
}

Index belady_evict(const CacheState& state, const NextUseTable& table, std::size_t position,
                   std::span<const UnitId> active) {
  std::unordered_set<Index> protect;
  for (const auto& a : active) protect.insert(a.index);
  bool found = false;
  Index victim = 0;
  std::size_t victim_next = 0;
  for (const auto& [u, entry] : state.resident_) {
    if (protect.contains(u)) continue;
    // Not accessed since last_use, so its next access after last_use is after `position`.
    const std::size_t nu = table.next_use(entry.last_use, u);
    if (nu != kNeverUsed && nu <= position) throw std::logic_error("belady_evict: table does not match trace");
    if (!found || nu > victim_next || (nu == victim_next && u < victim)) {
      found = true;
      victim = u;
      victim_next = nu;
    }
  }
  if (!found) throw std::logic_error("belady_evict: no evictable unit");
  return victim;
}

AccessStats cache_update(CacheState& state, std::span<const UnitId> active, const EvictionPolicy& policy) {
  for (const auto& a : active) {
    if (a.layer != state.layer_ || a.group != state.group_)
      throw std::invalid_argument("cache_update: unit belongs to another layer or group");
  }
  if (policy.kind == PolicyKind::Belady && policy.next_use == nullptr)
    throw std::invalid_argument("cache_update: Belady requires a next-use table");

  const std::size_t now = state.clock_;
  AccessStats stats;
  if (policy.kind == PolicyKind::NoCache) {
    stats.misses = active.size();
    stats.bypassed = active.size();
    ++state.clock_;
    return stats;
  }

  std::unordered_set<Index> protect;
  protect.reserve(active.size());
  for (const auto& a : active) protect.insert(a.index);
  if (protect.size() != active.size()) throw std::invalid_argument("cache_update: duplicate unit in active set");

  for (const auto& a : active) {
    if (auto it = state.resident_.find(a.index); it != state.resident_.end()) {
      ++stats.hits;
      ++it->second.freq;
      it->second.last_use = now;
    }
  }

  auto pick_victim = [&]() -> std::optional<Index> {
    if (policy.kind == PolicyKind::Belady) {
      bool any = false;
      for (const auto& [u, e] : state.resident_)
        if (!protect.contains(u)) {
          any = true;
          break;
        }
      if (!any) return std::nullopt;
      return belady_evict(state, *policy.next_use, now, active);
    }
    std::optional<Index> best;
    const CacheState::Entry* be = nullptr;
    for (const auto& [u, e] : state.resident_) {
      if (protect.contains(u)) continue;
      bool better = false;
      if (!best) {
        better = true;
      } else if (policy.kind == PolicyKind::Lfu) {
        better = e.freq < be->freq || (e.freq == be->freq && (e.last_use < be->last_use ||
                                                              (e.last_use == be->last_use && u < *best)));
      } else {
        better = e.last_use < be->last_use || (e.last_use == be->last_use && u < *best);
      }
      if (better) {
        best = u;
        be = &e;
      }
    }
    return best;
  };

  // Residents outside the active set; admitted units are active, so this only shrinks.
  auto evictable = static_cast<std::uint64_t>(state.resident_.size()) - stats.hits;
  for (const auto& a : active) {
    if (state.resident_.contains(a.index)) continue;  // hit, counted above
    ++stats.misses;
    if (state.size() >= state.capacity_) {
      if (evictable == 0) {
        ++stats.bypassed;
        continue;
      }
      --evictable;
      const auto victim = pick_victim();
      if (!victim) {
        ++stats.bypassed;
        continue;
      }
      state.resident_.erase(*victim);
    }
    state.resident_.emplace(a.index, CacheState::Entry{1, now});
  }
  ++state.clock_;
  return stats;
}

Eigen::VectorXd resident_bitvector(const CacheState& state, Index cardinality) {
  Eigen::VectorXd bits = Eigen::VectorXd::Zero(cardinality);
  for (const auto& [u, e] : state.resident())
    if (u >= 0 && u < cardinality) bits(u) = 1.0;
  return bits;
}

AccessStats replay_trace(std::span<const std::vector<Index>> trace, Index capacity, PolicyKind policy) {
  NextUseTable table;
  EvictionPolicy ev{policy, nullptr};
  if (policy == PolicyKind::Belady) {
    table = belady_precompute(trace);
    ev.next_use = &table;
  }
  CacheState state(0, UnitGroup::IntermediateBundle, capacity);
  AccessStats total;
  std::vector<UnitId> ids;
  for (const auto& step : trace) {
    ids.clear();
    for (Index u : step) ids.push_back({0, UnitGroup::IntermediateBundle, u});
    total += cache_update(state, ids, ev);
  }
  return total;
}

}  // namespace dipsim
