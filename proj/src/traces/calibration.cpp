#include "dipsim/traces/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dipsim/parallel.hpp"

namespace dipsim {

namespace {
void check_density(double d) {
  if (!(d > 0.0 && d <= 1.0)) throw std::invalid_argument("target density must be in (0, 1]");
}

void check_trace(const ActivationTrace& trace) {
  if (trace.num_layers() == 0 || trace.num_tokens() == 0 || trace.d_model == 0)
    throw std::invalid_argument("calibration needs a non-empty trace");
}

std::vector<double> magnitudes(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) out[static_cast<std::size_t>(i)] = std::abs(m(i));
  return out;
}
}  // namespace

double quantile_threshold(std::vector<double> values, double density) {
  check_density(density);
  if (values.empty()) throw std::invalid_argument("quantile_threshold: no values");
  if (density == 1.0) return 0.0;
  for (double& v : values) v = std::abs(v);
  const auto n = values.size();
  // Keep the top round(density * n) values; the threshold is the smallest kept one.
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(density * double(n))), 1, n);
  const auto pos = n - keep;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(pos), values.end());
  return values[pos];
}

PerLayerThreshold calibrate_per_layer_thresholds(const ActivationTrace& trace, double target_density) {
  check_density(target_density);
  check_trace(trace);
  PerLayerThreshold spec;
  for (const auto& layer : trace.layers) spec.t.push_back(quantile_threshold(magnitudes(layer), target_density));
  return spec;
}

GlobalThreshold calibrate_global_threshold(const ActivationTrace& trace, double target_density) {
  check_density(target_density);
  check_trace(trace);
  std::vector<double> all;
  for (const auto& layer : trace.layers) {
    auto m = magnitudes(layer);
    all.insert(all.end(), m.begin(), m.end());
  }
  return {quantile_threshold(std::move(all), target_density)};
}

std::vector<double> calibrate_gate_thresholds(const ActivationTrace& trace, const std::vector<MlpWeightsd>& weights,
                                              double target_density) {
  check_density(target_density);
  check_trace(trace);
  require_dims(static_cast<Index>(weights.size()) == trace.num_layers(), "calibrate_gate_thresholds: one MlpWeights per layer");
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require_dims(weights[l].d_model() == trace.d_model, "calibrate_gate_thresholds: weight dims");
    const Eigen::MatrixXd g = weights[l].gate * trace.layers[l];
    out.push_back(quantile_threshold(magnitudes(g.unaryExpr([](double v) { return silu(v); })), target_density));
  }
  return out;
}

std::vector<double> per_layer_density(const ActivationTrace& trace, const ThresholdSpec& spec) {
  std::vector<double> out;
  for (Index l = 0; l < trace.num_layers(); ++l) {
    double kept = 0;
    for (Index t = 0; t < trace.num_tokens(); ++t)
      kept += apply_threshold(trace.input(l, t), spec, static_cast<std::size_t>(l)).density();
    out.push_back(trace.num_tokens() ? kept / double(trace.num_tokens()) : 0.0);
  }
  return out;
}

std::vector<GammaSweepRow> gamma_sweep(const RunInputs& base, std::span<const double> gammas,
                                       std::span<const double> densities, unsigned threads) {
  if (gammas.empty() || densities.empty()) throw std::invalid_argument("gamma_sweep: empty grid");
  std::vector<GammaSweepRow> rows(gammas.size() * densities.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const double gamma = gammas[i / densities.size()];
    const double density = densities[i % densities.size()];
    RunInputs in = base;
    in.scheme.scheme = Scheme::DipCa;
    in.scheme.gamma = gamma;
    in.scheme.input_density = density;
    in.scheme.intermediate_density = density;
    const RunReport r = simulate_run(in);
    rows[i] = {gamma, density, r.throughput, r.hit_rate, r.mean_error};
  });
  return rows;
}

}  // namespace dipsim
