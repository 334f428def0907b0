#include "dipsim/traces/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dipsim/traces/trace_io.hpp"

namespace dipsim {

namespace {
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}
}  // namespace

void SyntheticTraceSpec::validate() const {
  if (num_tokens < 0 || num_layers < 1 || d_model < 1 || d_ff < 1)
    throw std::invalid_argument("SyntheticTraceSpec: invalid dims");
  auto check_len = [&](const std::vector<double>& v, const char* name) {
    if (v.size() != 1 && static_cast<Index>(v.size()) != num_layers)
      throw std::invalid_argument(std::string("SyntheticTraceSpec: ") + name + " needs 1 or num_layers values");
  };
  check_len(mu, "mu");
  check_len(sigma, "sigma");
  for (double s : sigma)
    if (!(s > 0)) throw std::invalid_argument("SyntheticTraceSpec: sigma must be > 0");
  for (double m : mu)
    if (!std::isfinite(m)) throw std::invalid_argument("SyntheticTraceSpec: mu must be finite");
}

double SyntheticTraceSpec::mu_at(Index layer) const { return mu.size() == 1 ? mu[0] : mu.at(std::size_t(layer)); }
double SyntheticTraceSpec::sigma_at(Index layer) const {
  return sigma.size() == 1 ? sigma[0] : sigma.at(std::size_t(layer));
}

ActivationTrace generate_synthetic_trace(const SyntheticTraceSpec& spec) {
  spec.validate();
  ActivationTrace trace = ActivationTrace::zeros(spec.num_layers, spec.d_model, spec.d_ff, spec.num_tokens);
  for (Index l = 0; l < spec.num_layers; ++l) {
    auto rng = stream_rng(spec.seed, std::uint64_t(l), 0x7472);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution sign(0.5);
    auto& m = trace.layers[std::size_t(l)];
    const double mu = spec.mu_at(l);
    const double sigma = spec.sigma_at(l);
    for (Index t = 0; t < spec.num_tokens; ++t)
      for (Index i = 0; i < spec.d_model; ++i) {
        const double mag = std::exp(mu + sigma * normal(rng));
        m(i, t) = sign(rng) ? mag : -mag;
      }
    round_to_float(m);
  }
  return trace;
}

std::vector<MlpWeightsd> generate_synthetic_weights(Index num_layers, Index d_model, Index d_ff, std::uint64_t seed) {
  if (num_layers < 1 || d_model < 1 || d_ff < 1) throw std::invalid_argument("generate_synthetic_weights: invalid dims");
  std::vector<MlpWeightsd> layers;
  for (Index l = 0; l < num_layers; ++l) {
    auto rng = stream_rng(seed, std::uint64_t(l), 0x7774);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Index rows, Index cols, double std) {
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(rows, cols, [&]() { return std * normal(rng); });
      round_to_float(m);
      return m;
    };
    MlpWeightsd w;
    w.up = gaussian(d_ff, d_model, 1.0 / std::sqrt(double(d_model)));
    w.gate = gaussian(d_ff, d_model, 1.0 / std::sqrt(double(d_model)));
    w.down = gaussian(d_model, d_ff, 1.0 / std::sqrt(double(d_ff)));
    layers.push_back(std::move(w));
  }
  return layers;
}

}  // namespace dipsim
