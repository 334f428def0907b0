#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace dipsim {

using Index = Eigen::Index;

/// MLP inputs for every (layer, token): layers[l].col(t) has length d_model.
struct ActivationTrace {
  Index d_model = 0;
  Index d_ff = 0;
  std::vector<Eigen::MatrixXd> layers;

  Index num_layers() const { return static_cast<Index>(layers.size()); }
  Index num_tokens() const { return layers.empty() ? 0 : layers.front().cols(); }
  auto input(Index layer, Index token) const { return layers[static_cast<std::size_t>(layer)].col(token); }

  /// Empty trace with zero-filled activations.
  static ActivationTrace zeros(Index num_layers, Index d_model, Index d_ff, Index num_tokens);
};

/// Active unit indices for every (token, layer): tokens[t][l] is sorted ascending.
struct UnitAccessTrace {
  Index num_layers = 0;
  Index d_model = 0;
  Index d_ff = 0;
  std::vector<std::vector<std::vector<Index>>> tokens;

  Index num_tokens() const { return static_cast<Index>(tokens.size()); }
  /// Access sequence of one layer, one entry per token.
  std::vector<std::vector<Index>> layer_sequence(Index layer) const;
};

}  // namespace dipsim
