#include "dipsim/traces/trace.hpp"

namespace dipsim {

ActivationTrace ActivationTrace::zeros(Index num_layers, Index d_model, Index d_ff, Index num_tokens) {
  ActivationTrace t;
  t.d_model = d_model;
  t.d_ff = d_ff;
  t.layers.assign(static_cast<std::size_t>(num_layers), Eigen::MatrixXd::Zero(d_model, num_tokens));
  return t;
}

std::vector<std::vector<Index>> UnitAccessTrace::layer_sequence(Index layer) const {
  std::vector<std::vector<Index>> seq;
  seq.reserve(tokens.size());
  for (const auto& tok : tokens) seq.push_back(tok.at(static_cast<std::size_t>(layer)));
  return seq;
}

}  // namespace dipsim
