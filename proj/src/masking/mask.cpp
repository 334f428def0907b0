#include "dipsim/masking/mask.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dipsim {

namespace {
constexpr std::array<std::pair<Scheme, std::string_view>, 8> kSchemeNames{{
    {Scheme::Dense, "dense"},
    {Scheme::GluPruning, "glu"},
    {Scheme::GatePruning, "gate"},
    {Scheme::UpPruning, "up"},
    {Scheme::Predictive, "predictive"},
    {Scheme::Dip, "dip"},
    {Scheme::DipCa, "dip-ca"},
    {Scheme::Cats, "cats"},
}};
}  // namespace

std::string_view scheme_name(Scheme s) {
  for (const auto& [scheme, name] : kSchemeNames)
    if (scheme == s) return name;
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  for (const auto& [scheme, n] : kSchemeNames)
    if (n == name) return scheme;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

SparsityMask::SparsityMask(Index dim, std::vector<Index> active) : dim_(dim), active_(std::move(active)) {
  if (dim < 0) throw std::invalid_argument("SparsityMask: negative dim");
  std::sort(active_.begin(), active_.end());
  if (std::adjacent_find(active_.begin(), active_.end()) != active_.end())
    throw std::invalid_argument("SparsityMask: duplicate index");
  if (!active_.empty() && (active_.front() < 0 || active_.back() >= dim))
    throw std::out_of_range("SparsityMask: index out of bounds");
}

SparsityMask SparsityMask::all(Index dim) {
  std::vector<Index> idx(static_cast<std::size_t>(dim));
  std::iota(idx.begin(), idx.end(), Index{0});
  return SparsityMask(dim, std::move(idx));
}

bool SparsityMask::contains(Index i) const { return std::binary_search(active_.begin(), active_.end(), i); }

MaskSet MaskSet::dense(Index d_model, Index d_ff) {
  MaskSet m;
  m.input = SparsityMask::all(d_model);
  m.intermediate = SparsityMask::all(d_ff);
  m.scheme = Scheme::Dense;
  return m;
}

}  // namespace dipsim
