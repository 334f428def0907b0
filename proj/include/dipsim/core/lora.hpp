#pragma once

// Low-rank adapters on the MLP projections and their distillation fit against
// the dense layer.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "dipsim/core/swiglu.hpp"

namespace dipsim {

/// Low-rank update W + a * b, with a: rows x r and b: r x cols.
template <typename Scalar>
struct LoraAdapter {
  Mat<Scalar> a;
  Mat<Scalar> b;

  Index rank() const { return a.cols(); }
  Index rows() const { return a.rows(); }
  Index cols() const { return b.cols(); }

  static LoraAdapter zeros(Index rows, Index cols, Index rank) {
    return {Mat<Scalar>::Zero(rows, rank), Mat<Scalar>::Zero(rank, cols)};
  }
};

template <typename Scalar, typename Derived>
Mat<Scalar> lora_fuse(const Eigen::MatrixBase<Derived>& w, const LoraAdapter<Scalar>& adapter) {
  require_dims(adapter.b.rows() == adapter.a.cols(), "lora_fuse: a/b rank mismatch");
  require_dims(w.rows() == adapter.rows() && w.cols() == adapter.cols(),
               "lora_fuse: adapter shape differs from matrix");
  return w + adapter.a * adapter.b;
}

/// One adapter per projection of an MLP layer.
template <typename Scalar>
struct LoraSet {
  LoraAdapter<Scalar> up;
  LoraAdapter<Scalar> gate;
  LoraAdapter<Scalar> down;
};

/// Weights with every adapter merged in. Column selection on the result is the
/// adapter applied before selection.
template <typename Scalar>
MlpWeights<Scalar> lora_fuse(const MlpWeights<Scalar>& w, const LoraSet<Scalar>& adapters) {
  return {lora_fuse(w.up, adapters.up), lora_fuse(w.gate, adapters.gate), lora_fuse(w.down, adapters.down)};
}

template <typename Scalar>
struct LoraLossGrad {
  Scalar loss = 0;
  LoraSet<Scalar> grad;
};

/// Mean squared error between the masked, adapted layer (student) and fixed
/// targets, plus its gradient with respect to every adapter entry.
///
/// inputs: d_model x N, targets: d_model x N, masks: one MaskSet per column.
template <typename Scalar>
LoraLossGrad<Scalar> lora_loss_and_grad(const MlpWeights<Scalar>& w, const LoraSet<Scalar>& adapters,
                                        const std::vector<MaskSet>& masks, const Mat<Scalar>& inputs,
                                        const Mat<Scalar>& targets) {
  const Index n = inputs.cols();
  require_dims(inputs.rows() == w.d_model(), "lora_loss_and_grad: inputs rows != d_model");
  require_dims(targets.rows() == w.d_model() && targets.cols() == n, "lora_loss_and_grad: targets shape");
  require_dims(static_cast<Index>(masks.size()) == n, "lora_loss_and_grad: one MaskSet per input required");

  Mat<Scalar> in_mask(w.d_model(), n);
  Mat<Scalar> mid_mask(w.d_ff(), n);
  for (Index c = 0; c < n; ++c) {
    const auto& m = masks[static_cast<std::size_t>(c)];
    require_dims(m.input.dim() == w.d_model() && m.intermediate.dim() == w.d_ff(),
                 "lora_loss_and_grad: mask dims");
    in_mask.col(c) = m.input.template indicator<Scalar>();
    mid_mask.col(c) = m.intermediate.template indicator<Scalar>();
  }

  const MlpWeights<Scalar> fused = lora_fuse(w, adapters);
  const Mat<Scalar> xm = inputs.cwiseProduct(in_mask);
  const Mat<Scalar> u = fused.up * xm;
  const Mat<Scalar> g = fused.gate * xm;
  const Mat<Scalar> s = g.unaryExpr([](Scalar v) { return silu(v); });
  const Mat<Scalar> h = u.cwiseProduct(s).cwiseProduct(mid_mask);
  const Mat<Scalar> residual = fused.down * h - targets;

  const Scalar denom = Scalar(n) * Scalar(w.d_model());
  LoraLossGrad<Scalar> out;
  out.loss = residual.squaredNorm() / denom;

  const Mat<Scalar> dy = residual * (Scalar(2) / denom);
  const Mat<Scalar> d_down = dy * h.transpose();
  const Mat<Scalar> dh = (fused.down.transpose() * dy).cwiseProduct(mid_mask);
  const Mat<Scalar> du = dh.cwiseProduct(s);
  const Mat<Scalar> dg = dh.cwiseProduct(u).cwiseProduct(g.unaryExpr([](Scalar v) { return silu_grad(v); }));
  const Mat<Scalar> d_up = du * xm.transpose();
  const Mat<Scalar> d_gate = dg * xm.transpose();

  auto split = [](const Mat<Scalar>& dw, const LoraAdapter<Scalar>& ad) {
    return LoraAdapter<Scalar>{dw * ad.b.transpose(), ad.a.transpose() * dw};
  };
  out.grad = {split(d_up, adapters.up), split(d_gate, adapters.gate), split(d_down, adapters.down)};
  return out;
}

struct DistillOptions {
  Index rank = 32;
  int iters = 1000;
  double lr = 0.05;
  double init_std = 0.01;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct DistillResult {
  LoraSet<Scalar> adapters;  // best iterate seen
  Scalar initial_loss = 0;
  Scalar final_loss = 0;     // loss of the returned adapters
  std::vector<Scalar> history;
};

template <typename Scalar>
using MaskFn = std::function<MaskSet(const MlpWeights<Scalar>&, const Vec<Scalar>&)>;

/// Fits up/gate/down adapters so the masked layer reproduces the dense layer on
/// `inputs` (d_model x N). A starts Gaussian, B starts at zero, so the initial
/// adapters are a no-op. Masks come from `masks_fn` on the original weights and
/// stay fixed during the fit. Plain gradient descent; returns the best iterate.
template <typename Scalar>
DistillResult<Scalar> lora_fit_distill(const MlpWeights<Scalar>& w, const MaskFn<Scalar>& masks_fn,
                                       const Mat<Scalar>& inputs, const DistillOptions& opt) {
  w.validate();
  if (opt.rank < 1 || opt.rank > std::min(w.d_model(), w.d_ff()))
    throw std::invalid_argument("lora_fit_distill: rank must be in [1, min(d_model, d_ff)]");
  if (opt.iters < 0) throw std::invalid_argument("lora_fit_distill: iters must be >= 0");

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, opt.init_std);
  auto init = [&](Index rows, Index cols) {
    LoraAdapter<Scalar> ad = LoraAdapter<Scalar>::zeros(rows, cols, opt.rank);
    ad.a = ad.a.unaryExpr([&](Scalar) { return Scalar(normal(rng)); });
    return ad;
  };
  LoraSet<Scalar> current{init(w.d_ff(), w.d_model()), init(w.d_ff(), w.d_model()),
                          init(w.d_model(), w.d_ff())};

  std::vector<MaskSet> masks;
  masks.reserve(static_cast<std::size_t>(inputs.cols()));
  Mat<Scalar> targets(w.d_model(), inputs.cols());
  for (Index c = 0; c < inputs.cols(); ++c) {
    const Vec<Scalar> x = inputs.col(c);
    masks.push_back(masks_fn(w, x));
    targets.col(c) = mlp_dense_forward(w, x);
  }

  DistillResult<Scalar> result;
  auto step = lora_loss_and_grad(w, current, masks, inputs, targets);
  result.initial_loss = step.loss;
  result.final_loss = step.loss;
  result.adapters = current;
  result.history.push_back(step.loss);

  const Scalar lr = Scalar(opt.lr);
  for (int it = 0; it < opt.iters; ++it) {
    for (auto [ad, gr] : {std::pair{&current.up, &step.grad.up}, std::pair{&current.gate, &step.grad.gate},
                          std::pair{&current.down, &step.grad.down}}) {
      ad->a -= lr * gr->a;
      ad->b -= lr * gr->b;
    }
    step = lora_loss_and_grad(w, current, masks, inputs, targets);
    if (!std::isfinite(step.loss)) throw DivergenceError("lora_fit_distill: loss became non-finite");
    result.history.push_back(step.loss);
    if (step.loss < result.final_loss) {
      result.final_loss = step.loss;
      result.adapters = current;
    }
  }
  return result;
}

}  // namespace dipsim
