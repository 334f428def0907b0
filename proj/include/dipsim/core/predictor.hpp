#pragma once

// Single-hidden-layer activation predictor: logits = W2 silu(W1 x + b1) + b2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "dipsim/core/swiglu.hpp"
#include "dipsim/masking/topk.hpp"

namespace dipsim {

template <typename Scalar>
struct Predictor {
  Mat<Scalar> w1;  // h x d_model
  Vec<Scalar> b1;  // h
  Mat<Scalar> w2;  // d_ff x h
  Vec<Scalar> b2;  // d_ff

  Index hidden() const { return w1.rows(); }
  Index d_model() const { return w1.cols(); }
  Index d_ff() const { return w2.rows(); }
  Index parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  static Predictor zeros(Index d_model, Index d_ff, Index hidden) {
    return {Mat<Scalar>::Zero(hidden, d_model), Vec<Scalar>::Zero(hidden), Mat<Scalar>::Zero(d_ff, hidden),
            Vec<Scalar>::Zero(d_ff)};
  }
};

using Predictord = Predictor<double>;

template <typename Scalar, typename Derived>
Vec<Scalar> predictor_forward(const Predictor<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  require_dims(x.size() == p.d_model(), "predictor_forward: len(x) != d_model");
  const Vec<Scalar> z = p.w1 * x + p.b1;
  return p.w2 * silu(z) + p.b2;
}

/// Binary targets: per column, 1 at the top ceil(frac * d_ff) magnitudes.
template <typename Scalar>
Mat<Scalar> predictor_targets(const Mat<Scalar>& glu, double target_frac) {
  if (!(target_frac > 0.0 && target_frac < 1.0))
    throw std::invalid_argument("predictor_targets: target_frac must be in (0, 1)");
  const auto k = std::min<Index>(glu.rows(), static_cast<Index>(std::ceil(target_frac * double(glu.rows()))));
  Mat<Scalar> t(glu.rows(), glu.cols());
  for (Index c = 0; c < glu.cols(); ++c) t.col(c) = topk_indices(glu.col(c), k).template indicator<Scalar>();
  return t;
}

template <typename Scalar>
struct PredictorLossGrad {
  Scalar loss = 0;
  Predictor<Scalar> grad;
};

/// Mean elementwise binary cross-entropy of sigmoid(logits) against `targets`.
template <typename Scalar>
PredictorLossGrad<Scalar> predictor_loss_and_grad(const Predictor<Scalar>& p, const Mat<Scalar>& inputs,
                                                  const Mat<Scalar>& targets) {
  require_dims(inputs.rows() == p.d_model(), "predictor_loss_and_grad: inputs rows != d_model");
  require_dims(targets.rows() == p.d_ff() && targets.cols() == inputs.cols(),
               "predictor_loss_and_grad: targets shape");
  const Index n = inputs.cols();
  const Mat<Scalar> z = (p.w1 * inputs).colwise() + p.b1;
  const Mat<Scalar> a = z.unaryExpr([](Scalar v) { return silu(v); });
  const Mat<Scalar> logits = (p.w2 * a).colwise() + p.b2;

  const Scalar denom = Scalar(n) * Scalar(p.d_ff());
  // softplus(l) - t*l, written to avoid overflow.
  const Mat<Scalar> softplus =
      logits.unaryExpr([](Scalar l) { return std::max(l, Scalar(0)) + std::log1p(std::exp(-std::abs(l))); });
  PredictorLossGrad<Scalar> out;
  out.loss = (softplus - targets.cwiseProduct(logits)).sum() / denom;

  const Mat<Scalar> dl = (logits.unaryExpr([](Scalar l) { return sigmoid(l); }) - targets) / denom;
  const Mat<Scalar> dz = (p.w2.transpose() * dl).cwiseProduct(z.unaryExpr([](Scalar v) { return silu_grad(v); }));
  out.grad.w2 = dl * a.transpose();
  out.grad.b2 = dl.rowwise().sum();
  out.grad.w1 = dz * inputs.transpose();
  out.grad.b1 = dz.rowwise().sum();
  return out;
}

struct PredictorTrainOptions {
  Index hidden = 64;
  int epochs = 20;
  double lr = 0.5;
  double target_frac = 0.1;
  Index batch_size = 32;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct PredictorTrainResult {
  Predictor<Scalar> predictor;  // best iterate by full-dataset loss
  Scalar initial_loss = 0;
  Scalar final_loss = 0;
  std::vector<Scalar> history;  // full-dataset loss after each epoch, index 0 = init
};

template <typename Scalar>
Predictor<Scalar> predictor_init(Index d_model, Index d_ff, Index hidden, std::uint64_t seed) {
  if (hidden < 1) throw std::invalid_argument("predictor: hidden dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto p = Predictor<Scalar>::zeros(d_model, d_ff, hidden);
  const double s1 = 1.0 / std::sqrt(double(d_model));
  const double s2 = 1.0 / std::sqrt(double(hidden));
  p.w1 = p.w1.unaryExpr([&](Scalar) { return Scalar(s1 * normal(rng)); });
  p.w2 = p.w2.unaryExpr([&](Scalar) { return Scalar(s2 * normal(rng)); });
  return p;
}

/// Trains a predictor on (x, GLU(x)) columns. Targets mark the top
/// `target_frac` magnitudes of each GLU column. Mini-batch gradient descent with
/// a seeded shuffle.
template <typename Scalar>
PredictorTrainResult<Scalar> predictor_train(const Mat<Scalar>& inputs, const Mat<Scalar>& glu,
                                             const PredictorTrainOptions& opt) {
  require_dims(inputs.cols() == glu.cols(), "predictor_train: inputs/glu column count differs");
  if (opt.epochs < 0) throw std::invalid_argument("predictor_train: epochs must be >= 0");
  const Mat<Scalar> targets = predictor_targets(glu, opt.target_frac);

  PredictorTrainResult<Scalar> result;
  Predictor<Scalar> p = predictor_init<Scalar>(inputs.rows(), glu.rows(), opt.hidden, opt.seed);
  result.initial_loss = predictor_loss_and_grad(p, inputs, targets).loss;
  result.final_loss = result.initial_loss;
  result.predictor = p;
  result.history.push_back(result.initial_loss);

  const Index n = inputs.cols();
  const Index batch = std::max<Index>(1, std::min(opt.batch_size, n));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 shuffle_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  const Scalar lr = Scalar(opt.lr);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Index start = 0; start < n; start += batch) {
      const Index len = std::min(batch, n - start);
      Mat<Scalar> xb(inputs.rows(), len);
      Mat<Scalar> tb(targets.rows(), len);
      for (Index j = 0; j < len; ++j) {
        const Index src = order[static_cast<std::size_t>(start + j)];
        xb.col(j) = inputs.col(src);
        tb.col(j) = targets.col(src);
      }
      const auto step = predictor_loss_and_grad(p, xb, tb);
      p.w1 -= lr * step.grad.w1;
      p.b1 -= lr * step.grad.b1;
      p.w2 -= lr * step.grad.w2;
      p.b2 -= lr * step.grad.b2;
    }
    const Scalar loss = predictor_loss_and_grad(p, inputs, targets).loss;
    if (!std::isfinite(loss)) throw DivergenceError("predictor_train: loss became non-finite");
    result.history.push_back(loss);
    if (loss < result.final_loss) {
      result.final_loss = loss;
      result.predictor = p;
    }
  }
  return result;
}

}  // namespace dipsim
