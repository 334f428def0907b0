#include "dipsim/masking/threshold.hpp"

#include <stdexcept>

#include "dipsim/masking/topk.hpp"

namespace dipsim {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

SparsityMask keep_at_least(const Eigen::Ref<const Eigen::VectorXd>& v, double t) {
  std::vector<Index> kept;
  for (Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) >= t) kept.push_back(i);
  return SparsityMask(v.size(), std::move(kept));
}
}  // namespace

void validate(const ThresholdSpec& spec) {
  std::visit(overloaded{
                 [](const GlobalThreshold& g) {
                   if (!(g.t >= 0.0)) throw std::invalid_argument("global threshold must be >= 0");
                 },
                 [](const PerLayerThreshold& p) {
                   for (double t : p.t)
                     if (!(t >= 0.0)) throw std::invalid_argument("per-layer thresholds must be >= 0");
                 },
                 [](const PerTokenDensity& d) {
                   if (!(d.density > 0.0 && d.density <= 1.0))
                     throw std::invalid_argument("per-token density must be in (0, 1]");
                 },
             },
             spec);
}

SparsityMask apply_threshold(const Eigen::Ref<const Eigen::VectorXd>& v, const ThresholdSpec& spec,
                             std::size_t layer) {
  validate(spec);
  return std::visit(overloaded{
                        [&](const GlobalThreshold& g) { return keep_at_least(v, g.t); },
                        [&](const PerLayerThreshold& p) {
                          if (layer >= p.t.size()) throw std::out_of_range("apply_threshold: layer out of range");
                          return keep_at_least(v, p.t[layer]);
                        },
                        [&](const PerTokenDensity& d) { return topk_indices(v, density_to_k(d.density, v.size())); },
                    },
                    spec);
}

}  // namespace dipsim
