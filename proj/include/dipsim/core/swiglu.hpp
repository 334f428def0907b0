#pragma once

// SwiGLU MLP kernels: dense and masked forward passes plus output error metrics.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>

#include <Eigen/Core>

#include "dipsim/errors.hpp"
#include "dipsim/masking/mask.hpp"

namespace dipsim {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <std::floating_point Scalar>
inline Scalar sigmoid(Scalar v) {
  // Split on sign so exp never overflows.
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

/// SiLU: v * sigmoid(v).
template <std::floating_point Scalar>
inline Scalar silu(Scalar v) {
  return v * sigmoid(v);
}

/// d silu / dv.
template <std::floating_point Scalar>
inline Scalar silu_grad(Scalar v) {
  const Scalar s = sigmoid(v);
  return s * (Scalar(1) + v * (Scalar(1) - s));
}

template <typename Derived>
auto silu(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar a) { return silu(a); });
}

/// Up, gate and down projections of one SwiGLU MLP layer.
template <typename Scalar>
struct MlpWeights {
  Mat<Scalar> up;    // d_ff x d_model
  Mat<Scalar> gate;  // d_ff x d_model
  Mat<Scalar> down;  // d_model x d_ff

  Index d_model() const { return up.cols(); }
  Index d_ff() const { return up.rows(); }

  void validate() const {
    require_dims(up.rows() >= 1 && up.cols() >= 1, "MlpWeights: empty up matrix");
    require_dims(gate.rows() == up.rows() && gate.cols() == up.cols(),
                 "MlpWeights: gate shape differs from up");
    require_dims(down.rows() == up.cols() && down.cols() == up.rows(),
                 "MlpWeights: down must be d_model x d_ff");
    require_dims(up.allFinite() && gate.allFinite() && down.allFinite(),
                 "MlpWeights: non-finite entries");
  }
};

using MlpWeightsd = MlpWeights<double>;

/// GLU(x) = (W_up x) * silu(W_gate x).
template <typename Scalar, typename Derived>
Vec<Scalar> glu_activations(const MlpWeights<Scalar>& w, const Eigen::MatrixBase<Derived>& x) {
  require_dims(x.size() == w.d_model(), "glu_activations: len(x) != d_model");
  const Vec<Scalar> u = w.up * x;
  const Vec<Scalar> g = w.gate * x;
  return u.cwiseProduct(silu(g));
}

template <typename Scalar, typename Derived>
Vec<Scalar> mlp_dense_forward(const MlpWeights<Scalar>& w, const Eigen::MatrixBase<Derived>& x) {
  return w.down * glu_activations(w, x);
}

/// GLU computed with only the input-masked columns of up and gate.
template <typename Scalar, typename Derived>
Vec<Scalar> glu_input_masked(const MlpWeights<Scalar>& w, const SparsityMask& input,
                             const Eigen::MatrixBase<Derived>& x) {
  require_dims(x.size() == w.d_model(), "glu_input_masked: len(x) != d_model");
  require_dims(input.dim() == w.d_model(), "glu_input_masked: input mask dim != d_model");
  if (input.is_full()) return glu_activations(w, x);
  Vec<Scalar> u = Vec<Scalar>::Zero(w.d_ff());
  Vec<Scalar> g = Vec<Scalar>::Zero(w.d_ff());
  for (Index j : input.active()) {
    u.noalias() += w.up.col(j) * x(j);
    g.noalias() += w.gate.col(j) * x(j);
  }
  return u.cwiseProduct(silu(g));
}

/// Forward pass with masked up/gate columns (input mask) and masked up/gate rows
/// and down columns (intermediate mask). Full masks reproduce the dense result.
template <typename Scalar, typename Derived>
Vec<Scalar> mlp_sparse_forward(const MlpWeights<Scalar>& w, const MaskSet& masks,
                               const Eigen::MatrixBase<Derived>& x) {
  require_dims(masks.input.dim() == w.d_model(), "mlp_sparse_forward: input mask dim != d_model");
  require_dims(masks.intermediate.dim() == w.d_ff(), "mlp_sparse_forward: intermediate mask dim != d_ff");
  if (masks.input.is_full() && masks.intermediate.is_full()) return mlp_dense_forward(w, x);
  const Vec<Scalar> h = glu_input_masked(w, masks.input, x);
  Vec<Scalar> y = Vec<Scalar>::Zero(w.d_model());
  for (Index i : masks.intermediate.active()) y.noalias() += w.down.col(i) * h(i);
  return y;
}

template <typename Scalar>
struct ErrorMetrics {
  Scalar relative_l2 = 0;
  Scalar cosine = 1;
};

/// Relative L2 error ||y - y_ref|| / max(||y_ref||, 1e-12) and cosine similarity.
/// Cosine is 1 when both vectors are zero and 0 when exactly one is.
template <typename DerivedA, typename DerivedB>
auto approx_error(const Eigen::MatrixBase<DerivedA>& y_ref, const Eigen::MatrixBase<DerivedB>& y) {
  using Scalar = typename DerivedA::Scalar;
  require_dims(y_ref.size() == y.size(), "approx_error: length mismatch");
  constexpr Scalar eps = Scalar(1e-12);
  const Scalar ref_norm = y_ref.norm();
  const Scalar y_norm = y.norm();
  ErrorMetrics<Scalar> m;
  m.relative_l2 = (y - y_ref).norm() / std::max(ref_norm, eps);
  if (ref_norm == Scalar(0) && y_norm == Scalar(0)) {
    m.cosine = 1;
  } else if (ref_norm == Scalar(0) || y_norm == Scalar(0)) {
    m.cosine = 0;
  } else {
    m.cosine = y_ref.dot(y) / (ref_norm * y_norm);
  }
  return m;
}

}  // namespace dipsim
