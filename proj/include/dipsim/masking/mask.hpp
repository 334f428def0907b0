#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace dipsim {

using Index = Eigen::Index;

/// Sparsification scheme that produced a MaskSet.
enum class Scheme : std::uint8_t {
  Dense,
  GluPruning,
  GatePruning,
  UpPruning,
  Predictive,
  Dip,
  DipCa,
  Cats,
};

std::string_view scheme_name(Scheme s);
/// Throws std::invalid_argument for unknown names.
Scheme parse_scheme(std::string_view name);

/// Set of active indices in [0, dim), kept sorted ascending.
class SparsityMask {
 public:
  SparsityMask() = default;
  /// Indices may arrive in any order; duplicates or out-of-range values throw.
  SparsityMask(Index dim, std::vector<Index> active);

  static SparsityMask all(Index dim);

  Index dim() const { return dim_; }
  Index size() const { return static_cast<Index>(active_.size()); }
  std::span<const Index> active() const { return active_; }
  bool contains(Index i) const;
  bool is_full() const { return size() == dim_; }
  double density() const { return dim_ == 0 ? 0.0 : double(size()) / double(dim_); }

  /// 0/1 indicator vector of length dim.
  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> indicator() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(dim_);
    for (Index i : active_) m(i) = Scalar(1);
    return m;
  }

  friend bool operator==(const SparsityMask&, const SparsityMask&) = default;

 private:
  Index dim_ = 0;
  std::vector<Index> active_;
};

/// Pair of per-token prunings for one MLP layer.
///
/// `input` masks columns of up/gate (length d_model); `intermediate` masks
/// up/gate rows and down columns (length d_ff). The score vectors hold the
/// values the top-k selection ran on and order cache insertions; they are
/// empty for dimensions the scheme does not prune.
struct MaskSet {
  SparsityMask input;
  SparsityMask intermediate;
  Scheme scheme = Scheme::Dense;
  Eigen::VectorXd input_scores;
  Eigen::VectorXd intermediate_scores;

  static MaskSet dense(Index d_model, Index d_ff);
};

}  // namespace dipsim
