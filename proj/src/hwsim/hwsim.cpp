#include "dipsim/hwsim/hwsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dipsim/masking/topk.hpp"

namespace dipsim {

void HardwareConfig::validate() const {
  if (!(dram_capacity > 0 && dram_bandwidth > 0 && flash_bandwidth > 0))
    throw std::invalid_argument("HardwareConfig: capacity and bandwidths must be > 0");
}

void ModelGeometry::validate() const {
  if (num_layers < 1 || d_model < 1 || d_ff < 1) throw std::invalid_argument("ModelGeometry: dims must be >= 1");
  if (!(bytes_per_weight > 0)) throw std::invalid_argument("ModelGeometry: bytes_per_weight must be > 0");
  if (!(static_bytes >= 0)) throw std::invalid_argument("ModelGeometry: static_bytes must be >= 0");
}

void SchemeConfig::validate() const {
  for (double d : {input_density, intermediate_density})
    if (!(d > 0.0 && d <= 1.0)) throw std::invalid_argument("densities must be in (0, 1]");
  CacheAwareParams{gamma}.validate();
  for (double t : cats_thresholds)
    if (!(t >= 0.0)) throw std::invalid_argument("CATS thresholds must be >= 0");
}

std::vector<GroupLayout> unit_layout(const ModelGeometry& geo, Scheme scheme) {
  const double b = geo.bytes_per_weight;
  const double col_up_gate = 2.0 * double(geo.d_ff) * b;  // shared-index up + gate columns
  const double col_one = double(geo.d_ff) * b;             // one up or gate column
  const double row = double(geo.d_model) * b;              // one up/gate row or down column
  using G = UnitGroup;
  switch (scheme) {
    case Scheme::Dense:
      return {{G::InputBundle, geo.d_model, col_up_gate, true}, {G::IntermediateBundle, geo.d_ff, row, true}};
    case Scheme::GluPruning:
      return {{G::InputBundle, geo.d_model, col_up_gate, true}, {G::IntermediateBundle, geo.d_ff, row, false}};
    case Scheme::GatePruning:
    case Scheme::Cats:
    case Scheme::UpPruning:
      return {{G::DenseChunk, geo.d_model, col_one, true}, {G::IntermediateBundle, geo.d_ff, 2.0 * row, false}};
    case Scheme::Predictive:
      return {{G::IntermediateBundle, geo.d_ff, 3.0 * row, false}};
    case Scheme::Dip:
    case Scheme::DipCa:
      return {{G::InputBundle, geo.d_model, col_up_gate, false}, {G::IntermediateBundle, geo.d_ff, row, false}};
  }
  throw std::invalid_argument("unit_layout: unknown scheme");
}

double unit_bytes(const ModelGeometry& geo, UnitGroup group, Scheme scheme) {
  for (const auto& g : unit_layout(geo, scheme))
    if (g.group == group) return g.unit_bytes;
  throw std::invalid_argument("unit_bytes: scheme has no such group");
}

std::vector<Index> allocate_units(double budget_bytes, std::span<const GroupLayout> layout) {
  double total = 0.0;
  for (const auto& g : layout) total += double(g.cardinality) * g.unit_bytes;
  std::vector<Index> units;
  units.reserve(layout.size());
  for (const auto& g : layout) {
    const double share = total > 0 ? budget_bytes * (double(g.cardinality) * g.unit_bytes) / total : 0.0;
    // Tolerance keeps exact byte budgets from flooring one unit short.
    units.push_back(static_cast<Index>(std::floor(share / g.unit_bytes + 1e-9)));
  }
  return units;
}

DramAllocation allocate_dram(const HardwareConfig& hw, const ModelGeometry& geo, Scheme scheme) {
  hw.validate();
  geo.validate();
  if (geo.static_bytes > hw.dram_capacity)
    throw SimulationError("static bytes exceed DRAM capacity; the model cannot run");
  DramAllocation alloc;
  alloc.per_layer_bytes = (hw.dram_capacity - geo.static_bytes) / double(geo.num_layers);
  const auto layout = unit_layout(geo, scheme);
  const auto units = allocate_units(alloc.per_layer_bytes, layout);
  alloc.capacity.assign(static_cast<std::size_t>(geo.num_layers), units);
  return alloc;
}

LayerCaches LayerCaches::make(const ModelGeometry& geo, Scheme scheme, const DramAllocation& alloc) {
  LayerCaches c;
  c.layout = unit_layout(geo, scheme);
  require_dims(static_cast<Index>(alloc.capacity.size()) == geo.num_layers, "LayerCaches: allocation layer count");
  c.states.resize(alloc.capacity.size());
  for (std::size_t l = 0; l < alloc.capacity.size(); ++l) {
    require_dims(alloc.capacity[l].size() == c.layout.size(), "LayerCaches: allocation group count");
    for (std::size_t g = 0; g < c.layout.size(); ++g)
      c.states[l].emplace_back(static_cast<int>(l), c.layout[g].group, alloc.capacity[l][g]);
  }
  return c;
}

namespace {

std::vector<UnitId> ordered_units(int layer, UnitGroup group, const SparsityMask& mask, const Eigen::VectorXd& scores) {
  std::vector<Index> idx(mask.active().begin(), mask.active().end());
  if (scores.size() == mask.dim()) {
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  }
  std::vector<UnitId> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back({layer, group, i});
  return out;
}

std::vector<UnitId> all_units(int layer, UnitGroup group, Index n) {
  std::vector<UnitId> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.push_back({layer, group, i});
  return out;
}

}  // namespace

std::vector<std::vector<UnitId>> active_units(int layer, const MaskSet& masks, std::span<const GroupLayout> layout) {
  std::vector<std::vector<UnitId>> out;
  out.reserve(layout.size());
  for (const auto& g : layout) {
    if (g.always_active) {
      out.push_back(all_units(layer, g.group, g.cardinality));
      continue;
    }
    const bool input = g.group == UnitGroup::InputBundle;
    const SparsityMask& m = input ? masks.input : masks.intermediate;
    require_dims(m.dim() == g.cardinality, "active_units: mask dim does not match group cardinality");
    out.push_back(ordered_units(layer, g.group, m, input ? masks.input_scores : masks.intermediate_scores));
  }
  return out;
}

TokenCost simulate_token(LayerCaches& caches, std::span<const MaskSet> masks, const HardwareConfig& hw,
                         const ModelGeometry& geo, std::span<const std::vector<EvictionPolicy>> policies,
                         std::vector<AccessStats>* per_layer) {
  require_dims(static_cast<Index>(masks.size()) == geo.num_layers, "simulate_token: one MaskSet per layer required");
  require_dims(caches.states.size() == masks.size() && policies.size() == masks.size(),
               "simulate_token: caches/policies layer count");
  TokenCost cost;
  cost.dram_bytes = geo.static_bytes;
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const auto units = active_units(static_cast<int>(l), masks[l], caches.layout);
    for (std::size_t g = 0; g < caches.layout.size(); ++g) {
      const auto stats = cache_update(caches.states[l][g], units[g], policies[l][g]);
      const double ub = caches.layout[g].unit_bytes;
      cost.flash_bytes += double(stats.misses) * ub;
      cost.dram_bytes += double(stats.hits) * ub;
      cost.hits += stats.hits;
      cost.misses += stats.misses;
      cost.bypassed += stats.bypassed;
      if (per_layer) (*per_layer)[l] += stats;
    }
  }
  cost.latency = cost.flash_bytes / hw.flash_bandwidth + cost.dram_bytes / hw.dram_bandwidth;
  return cost;
}

double predictor_bytes(const std::vector<Predictord>& predictors, double bytes_per_weight) {
  double params = 0;
  for (const auto& p : predictors) params += double(p.parameter_count());
  return params * bytes_per_weight;
}

namespace {

struct MaskContext {
  const RunInputs& in;
  Index k_in;
  Index k_mid;
  std::ptrdiff_t input_group = -1;
  std::ptrdiff_t mid_group = -1;
};

MaskSet layer_masks(const MaskContext& ctx, Index layer, const Eigen::VectorXd& x, const LayerCaches* caches) {
  const auto& s = ctx.in.scheme;
  const auto l = static_cast<std::size_t>(layer);
  const auto& geo = ctx.in.geo;
  if (s.scheme == Scheme::Dense) return MaskSet::dense(geo.d_model, geo.d_ff);
  const auto& w = (*ctx.in.weights)[l];
  switch (s.scheme) {
    case Scheme::GluPruning:
      return scheme_glu_pruning(w, x, ctx.k_mid);
    case Scheme::GatePruning:
      return scheme_gate_pruning(w, x, ctx.k_mid);
    case Scheme::UpPruning:
      return scheme_up_pruning(w, x, ctx.k_mid);
    case Scheme::Cats:
      return scheme_cats(w, x, s.cats_thresholds.at(l));
    case Scheme::Predictive:
      return s.predictor_oracle ? scheme_predictive_oracle(w, x, ctx.k_mid)
                                : scheme_predictive((*ctx.in.predictors)[l], x, ctx.k_mid);
    case Scheme::Dip:
      return scheme_dip(w, x, ctx.k_in, ctx.k_mid);
    case Scheme::DipCa: {
      const auto& st = caches->states[l];
      const Eigen::VectorXd c_in = resident_bitvector(st[static_cast<std::size_t>(ctx.input_group)], geo.d_model);
      const Eigen::VectorXd c_mid = resident_bitvector(st[static_cast<std::size_t>(ctx.mid_group)], geo.d_ff);
      return scheme_dip_ca(w, x, c_in, c_mid, ctx.k_in, ctx.k_mid, CacheAwareParams{s.gamma}, s.ca_target);
    }
    case Scheme::Dense:
      break;
  }
  return MaskSet::dense(geo.d_model, geo.d_ff);
}

double token_error(const RunInputs& in, Index token, std::span<const MaskSet> masks) {
  double sum = 0.0;
  for (Index l = 0; l < in.geo.num_layers; ++l) {
    const auto& w = (*in.weights)[static_cast<std::size_t>(l)];
    const Eigen::VectorXd x = in.trace->input(l, token);
    const Eigen::VectorXd ref = mlp_dense_forward(w, x);
    const Eigen::VectorXd y = mlp_sparse_forward(w, masks[static_cast<std::size_t>(l)], x);
    sum += approx_error(ref, y).relative_l2;
  }
  return sum / double(in.geo.num_layers);
}

void check_inputs(const RunInputs& in) {
  if (in.trace == nullptr) throw std::invalid_argument("simulate_run: trace required");
  in.scheme.validate();
  in.hw.validate();
  in.geo.validate();
  const auto& tr = *in.trace;
  require_dims(tr.num_layers() == in.geo.num_layers && tr.d_model == in.geo.d_model && tr.d_ff == in.geo.d_ff,
               "simulate_run: trace dims do not match model geometry");
  const bool needs_weights = in.scheme.scheme != Scheme::Dense || in.kernel_eval;
  if (needs_weights) {
    if (in.weights == nullptr || static_cast<Index>(in.weights->size()) != in.geo.num_layers)
      throw std::invalid_argument("simulate_run: one MlpWeights per layer required");
    for (const auto& w : *in.weights)
      require_dims(w.d_model() == in.geo.d_model && w.d_ff() == in.geo.d_ff, "simulate_run: weight dims");
  }
  if (in.scheme.scheme == Scheme::Predictive && !in.scheme.predictor_oracle) {
    if (in.predictors == nullptr || static_cast<Index>(in.predictors->size()) != in.geo.num_layers)
      throw std::invalid_argument("simulate_run: one predictor per layer required");
  }
  if (in.scheme.scheme == Scheme::Cats &&
      static_cast<Index>(in.scheme.cats_thresholds.size()) != in.geo.num_layers)
    throw std::invalid_argument("simulate_run: CATS needs one threshold per layer");
  if (in.policy == PolicyKind::Belady && in.scheme.scheme == Scheme::DipCa)
    throw SimulationError("Belady eviction is undefined for DIP-CA: its masks depend on cache state");
}

}  // namespace

RunReport simulate_run(const RunInputs& in) {
  check_inputs(in);
  const auto& tr = *in.trace;

  ModelGeometry geo = in.geo;
  if (in.scheme.scheme == Scheme::Predictive && !in.scheme.predictor_oracle)
    geo.static_bytes += predictor_bytes(*in.predictors, geo.bytes_per_weight);

  RunReport report;
  report.static_bytes = geo.static_bytes;
  report.allocation = allocate_dram(in.hw, geo, in.scheme.scheme);
  LayerCaches caches = LayerCaches::make(geo, in.scheme.scheme, report.allocation);
  report.per_layer.assign(static_cast<std::size_t>(geo.num_layers), {});

  MaskContext ctx{in, density_to_k(in.scheme.input_density, geo.d_model),
                  density_to_k(in.scheme.intermediate_density, geo.d_ff)};
  for (std::size_t g = 0; g < caches.layout.size(); ++g) {
    if (caches.layout[g].group == UnitGroup::InputBundle) ctx.input_group = static_cast<std::ptrdiff_t>(g);
    if (caches.layout[g].group == UnitGroup::IntermediateBundle) ctx.mid_group = static_cast<std::ptrdiff_t>(g);
  }

  const Index tokens = tr.num_tokens();
  const auto layers = static_cast<std::size_t>(geo.num_layers);
  std::vector<std::vector<EvictionPolicy>> policies(layers,
                                                    std::vector<EvictionPolicy>(caches.layout.size(), {in.policy}));

  // Belady needs the whole future access sequence: masks of cache-oblivious
  // schemes do not depend on the cache, so a first pass produces them.
  std::vector<std::vector<MaskSet>> precomputed;
  std::vector<std::vector<NextUseTable>> tables;
  if (in.policy == PolicyKind::Belady) {
    precomputed.resize(static_cast<std::size_t>(tokens));
    std::vector<std::vector<std::vector<std::vector<Index>>>> seqs(
        layers, std::vector<std::vector<std::vector<Index>>>(caches.layout.size()));
    for (Index t = 0; t < tokens; ++t) {
      auto& row = precomputed[static_cast<std::size_t>(t)];
      for (std::size_t l = 0; l < layers; ++l) {
        row.push_back(layer_masks(ctx, static_cast<Index>(l), tr.input(static_cast<Index>(l), t), nullptr));
        const auto units = active_units(static_cast<int>(l), row.back(), caches.layout);
        for (std::size_t g = 0; g < units.size(); ++g) {
          std::vector<Index> ids;
          ids.reserve(units[g].size());
          for (const auto& u : units[g]) ids.push_back(u.index);
          seqs[l][g].push_back(std::move(ids));
        }
      }
    }
    tables.resize(layers);
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t g = 0; g < caches.layout.size(); ++g) tables[l].push_back(belady_precompute(seqs[l][g]));
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t g = 0; g < caches.layout.size(); ++g) policies[l][g] = EvictionPolicy::belady(tables[l][g]);
  }

  double error_sum = 0.0;
  std::vector<MaskSet> masks;
  for (Index t = 0; t < tokens; ++t) {
    if (in.policy == PolicyKind::Belady) {
      masks = std::move(precomputed[static_cast<std::size_t>(t)]);
    } else {
      masks.clear();
      for (std::size_t l = 0; l < layers; ++l)
        masks.push_back(layer_masks(ctx, static_cast<Index>(l), tr.input(static_cast<Index>(l), t), &caches));
    }
    if (in.kernel_eval) error_sum += token_error(in, t, masks);
    const TokenCost cost = simulate_token(caches, masks, in.hw, geo, policies, &report.per_layer);
    report.total_latency += cost.latency;
    report.total_flash_bytes += cost.flash_bytes;
    report.total_dram_bytes += cost.dram_bytes;
    report.per_token.push_back(cost);
  }

  for (const auto& s : report.per_layer) report.totals += s;
  report.hit_rate = report.totals.hit_rate();
  report.throughput = report.total_latency > 0 ? double(tokens) / report.total_latency : 0.0;
  if (in.kernel_eval) report.mean_error = tokens > 0 ? error_sum / double(tokens) : 0.0;
  return report;
}

SweepPoint throughput_at_error(std::span<const SweepPoint> sweep, double budget) {
  if (sweep.empty()) throw std::invalid_argument("throughput_at_error: empty sweep");
  const SweepPoint* best = nullptr;
  for (const auto& p : sweep) {
    if (!(p.error <= budget)) continue;
    if (!best || p.throughput > best->throughput || (p.throughput == best->throughput && p.error < best->error))
      best = &p;
  }
  if (!best) throw std::runtime_error("throughput_at_error: no configuration within the error budget");
  return *best;
}

}  // namespace dipsim
