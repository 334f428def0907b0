#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dipsim/masking/mask.hpp"

namespace dipsim {

/// Indices of the k largest |v_i|; ties go to the lower index.
template <typename Derived>
SparsityMask topk_indices(const Eigen::MatrixBase<Derived>& v, Index k) {
  const Index n = v.size();
  if (k < 0 || k > n) throw std::out_of_range("topk_indices: k out of range");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto by_magnitude = [&](Index a, Index b) {
    const auto ma = std::abs(v(a));
    const auto mb = std::abs(v(b));
    return ma > mb || (ma == mb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), by_magnitude);
  order.resize(static_cast<std::size_t>(k));
  return SparsityMask(n, std::move(order));
}

/// k = max(1, round(density * dim)), clamped to dim.
inline Index density_to_k(double density, Index dim) {
  if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("density must be in (0, 1]");
  const auto k = static_cast<Index>(std::llround(density * double(dim)));
  return std::clamp<Index>(k, 1, dim);
}

}  // namespace dipsim
