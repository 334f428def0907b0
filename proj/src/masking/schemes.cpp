#include "dipsim/masking/schemes.hpp"

#include <stdexcept>

#include "dipsim/masking/topk.hpp"

namespace dipsim {

namespace {

void check_input(const MlpWeightsd& w, const VecRef& x) {
  require_dims(x.size() == w.d_model(), "scheme: len(x) != d_model");
}

void check_k(Index k, Index dim, const char* what) {
  if (k < 0 || k > dim) throw DimensionError(std::string(what) + " out of range");
}

MaskSet intermediate_only(Scheme scheme, Index d_model, VectorXd scores, Index k_mid) {
  MaskSet m;
  m.scheme = scheme;
  m.input = SparsityMask::all(d_model);
  m.intermediate = topk_indices(scores, k_mid);
  m.intermediate_scores = std::move(scores);
  return m;
}

}  // namespace

void CacheAwareParams::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
}

MaskSet scheme_glu_pruning(const MlpWeightsd& w, const VecRef& x, Index k_mid) {
  check_input(w, x);
  check_k(k_mid, w.d_ff(), "k_mid");
  return intermediate_only(Scheme::GluPruning, w.d_model(), glu_activations(w, x).cwiseAbs(), k_mid);
}

MaskSet scheme_gate_pruning(const MlpWeightsd& w, const VecRef& x, Index k_mid) {
  check_input(w, x);
  check_k(k_mid, w.d_ff(), "k_mid");
  const VectorXd g = w.gate * x;
  return intermediate_only(Scheme::GatePruning, w.d_model(), silu(g).cwiseAbs(), k_mid);
}

MaskSet scheme_cats(const MlpWeightsd& w, const VecRef& x, double threshold) {
  check_input(w, x);
  if (!(threshold >= 0.0)) throw std::invalid_argument("scheme_cats: threshold must be >= 0");
  const VectorXd g = w.gate * x;
  VectorXd scores = silu(g).cwiseAbs();
  std::vector<Index> kept;
  for (Index i = 0; i < scores.size(); ++i)
    if (scores(i) >= threshold) kept.push_back(i);
  MaskSet m;
  m.scheme = Scheme::Cats;
  m.input = SparsityMask::all(w.d_model());
  m.intermediate = SparsityMask(w.d_ff(), std::move(kept));
  m.intermediate_scores = std::move(scores);
  return m;
}

MaskSet scheme_up_pruning(const MlpWeightsd& w, const VecRef& x, Index k_mid) {
  check_input(w, x);
  check_k(k_mid, w.d_ff(), "k_mid");
  const VectorXd u = w.up * x;
  return intermediate_only(Scheme::UpPruning, w.d_model(), u.cwiseAbs(), k_mid);
}

MaskSet scheme_predictive(const Predictord& p, const VecRef& x, Index k_mid) {
  require_dims(x.size() == p.d_model(), "scheme_predictive: len(x) != d_model");
  check_k(k_mid, p.d_ff(), "k_mid");
  // Top-k runs on the signed logits: larger logit = more likely active.
  VectorXd logits = predictor_forward(p, x);
  const double shift = logits.minCoeff();
  VectorXd scores = logits.array() - shift;
  auto m = intermediate_only(Scheme::Predictive, p.d_model(), scores, k_mid);
  m.intermediate_scores = std::move(logits);
  return m;
}

MaskSet scheme_predictive_oracle(const MlpWeightsd& w, const VecRef& x, Index k_mid) {
  check_input(w, x);
  check_k(k_mid, w.d_ff(), "k_mid");
  return intermediate_only(Scheme::Predictive, w.d_model(), glu_activations(w, x).cwiseAbs(), k_mid);
}

MaskSet scheme_dip(const MlpWeightsd& w, const VecRef& x, Index k_in, Index k_mid) {
  check_input(w, x);
  check_k(k_in, w.d_model(), "k_in");
  check_k(k_mid, w.d_ff(), "k_mid");
  MaskSet m;
  m.scheme = Scheme::Dip;
  m.input_scores = x.cwiseAbs();
  m.input = topk_indices(m.input_scores, k_in);
  m.intermediate_scores = glu_input_masked(w, m.input, x).cwiseAbs();
  m.intermediate = topk_indices(m.intermediate_scores, k_mid);
  return m;
}

VectorXd dip_ca_scores(const VecRef& x, const VecRef& cached, double gamma) {
  require_dims(x.size() == cached.size(), "dip_ca_scores: len(c) != len(x)");
  CacheAwareParams{gamma}.validate();
  const double peak = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  if (peak == 0.0) return VectorXd::Zero(x.size());
  const VectorXd weight = cached.array() + gamma * (1.0 - cached.array());
  return x.cwiseAbs().cwiseProduct(weight) / peak;
}

MaskSet scheme_dip_ca(const MlpWeightsd& w, const VecRef& x, const VecRef& cached_input,
                      const VecRef& cached_intermediate, Index k_in, Index k_mid, CacheAwareParams params,
                      CacheAwareTarget target) {
  check_input(w, x);
  check_k(k_in, w.d_model(), "k_in");
  check_k(k_mid, w.d_ff(), "k_mid");
  params.validate();
  require_dims(cached_input.size() == w.d_model(), "scheme_dip_ca: input cache bitvector length != d_model");
  require_dims(cached_intermediate.size() == w.d_ff(), "scheme_dip_ca: intermediate cache bitvector length != d_ff");

  const bool ca_in = target != CacheAwareTarget::Intermediate;
  const bool ca_mid = target != CacheAwareTarget::Input;
  MaskSet m;
  m.scheme = Scheme::DipCa;
  m.input_scores = ca_in ? dip_ca_scores(x, cached_input, params.gamma) : VectorXd(x.cwiseAbs());
  m.input = topk_indices(m.input_scores, k_in);
  const VectorXd glu = glu_input_masked(w, m.input, x);
  m.intermediate_scores =
      ca_mid ? dip_ca_scores(glu, cached_intermediate, params.gamma) : VectorXd(glu.cwiseAbs());
  m.intermediate = topk_indices(m.intermediate_scores, k_mid);
  return m;
}

}  // namespace dipsim
