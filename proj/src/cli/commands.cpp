#include "dipsim/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>

#include "dipsim/errors.hpp"
#include "dipsim/parallel.hpp"
#include "dipsim/traces/trace_io.hpp"

namespace dipsim::cli {

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json budget_value(double b) { return std::isinf(b) ? json("inf") : json(b); }

json envelope(const ExperimentConfig& cfg, const char* kind) {
  return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"generated_at", utc_timestamp()},
          {"config", to_json(cfg)}};
}

std::filesystem::path require_output(const ExperimentConfig& cfg) {
  if (cfg.output.empty()) throw ConfigError("no output path: pass --out or set 'output' in the config");
  return cfg.output;
}

ExperimentConfig load_with(const std::filesystem::path& config, const Overrides& o) {
  ExperimentConfig cfg = load_config(config);
  apply(cfg, o);
  return cfg;
}

}  // namespace

void apply(ExperimentConfig& cfg, const Overrides& o) {
  if (o.out) cfg.output = *o.out;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.weights.seed = *o.seed;
    cfg.predictor.train.seed = *o.seed;
    if (cfg.trace.synthetic) cfg.trace.synthetic->seed = *o.seed;
  }
  if (o.threads) cfg.threads = std::max(1u, *o.threads);
  if (o.per_token) cfg.per_token = true;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const std::filesystem::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(path, text.data(), text.size());
}

LoadedInputs load_inputs(const ExperimentConfig& cfg) {
  LoadedInputs data;
  data.trace = cfg.trace.file ? read_activation_trace(*cfg.trace.file) : generate_synthetic_trace(*cfg.trace.synthetic);
  const auto& geo = cfg.model;
  require_dims(data.trace.num_layers() == geo.num_layers && data.trace.d_model == geo.d_model &&
                   data.trace.d_ff == geo.d_ff,
               "trace dims do not match the model geometry");
  const bool needs_weights = cfg.scheme.scheme != Scheme::Dense || cfg.kernel_eval;
  if (needs_weights) {
    data.weights = cfg.weights.file ? read_mlp_weights(*cfg.weights.file)
                                    : generate_synthetic_weights(geo.num_layers, geo.d_model, geo.d_ff, cfg.weights.seed);
  }
  if (cfg.scheme.scheme == Scheme::Predictive && !cfg.predictor.oracle) {
    for (std::size_t l = 0; l < data.weights.size(); ++l) {
      const Eigen::MatrixXd& x = data.trace.layers[l];
      Eigen::MatrixXd glu(geo.d_ff, x.cols());
      for (Index t = 0; t < x.cols(); ++t) glu.col(t) = glu_activations(data.weights[l], x.col(t));
      auto opt = cfg.predictor.train;
      opt.seed = cfg.predictor.train.seed + l;
      data.predictors.push_back(predictor_train(x, glu, opt).predictor);
    }
  }
  return data;
}

RunInputs make_run_inputs(const ExperimentConfig& cfg, const LoadedInputs& data) {
  RunInputs in;
  in.trace = &data.trace;
  in.weights = data.weights.empty() ? nullptr : &data.weights;
  in.predictors = data.predictors.empty() ? nullptr : &data.predictors;
  in.scheme = cfg.scheme;
  in.policy = cfg.policy;
  in.hw = cfg.hardware;
  in.geo = cfg.model;
  in.kernel_eval = cfg.kernel_eval;
  if (cfg.scheme.scheme == Scheme::Cats)
    in.scheme.cats_thresholds = calibrate_gate_thresholds(data.trace, data.weights, cfg.scheme.intermediate_density);
  return in;
}

json report_json(const ExperimentConfig& cfg, const RunReport& r) {
  json j = envelope(cfg, "run");
  const double tokens = double(r.num_tokens());
  j["metrics"] = {{"num_tokens", r.num_tokens()},
                  {"throughput_tok_s", r.throughput},
                  {"mean_latency_s", tokens > 0 ? r.total_latency / tokens : 0.0},
                  {"total_latency_s", r.total_latency},
                  {"hit_rate", r.hit_rate},
                  {"hits", r.totals.hits},
                  {"misses", r.totals.misses},
                  {"bypassed", r.totals.bypassed},
                  {"mean_error", optional_number(r.mean_error)},
                  {"total_flash_bytes", r.total_flash_bytes},
                  {"total_dram_bytes", r.total_dram_bytes},
                  {"static_bytes", r.static_bytes},
                  {"cache_bytes_per_layer", r.allocation.per_layer_bytes}};
  json layers = json::array();
  for (std::size_t l = 0; l < r.per_layer.size(); ++l) {
    const auto& s = r.per_layer[l];
    layers.push_back({{"layer", l}, {"hits", s.hits}, {"misses", s.misses}, {"bypassed", s.bypassed},
                      {"hit_rate", s.hit_rate()}});
  }
  j["per_layer"] = layers;
  if (cfg.per_token) {
    json tokens_json = json::array();
    for (const auto& t : r.per_token)
      tokens_json.push_back({{"flash_bytes", t.flash_bytes}, {"dram_bytes", t.dram_bytes}, {"latency_s", t.latency},
                             {"hits", t.hits}, {"misses", t.misses}, {"bypassed", t.bypassed}});
    j["per_token"] = tokens_json;
  }
  return j;
}

json run_experiment(const ExperimentConfig& cfg) {
  const LoadedInputs data = load_inputs(cfg);
  return report_json(cfg, simulate_run(make_run_inputs(cfg, data)));
}

json sweep_experiment(const ExperimentConfig& cfg) {
  if (cfg.grid_densities.empty()) throw ConfigError("sweep needs grid.densities");
  ExperimentConfig c = cfg;
  c.kernel_eval = true;
  const LoadedInputs data = load_inputs(c);
  const std::vector<double> gammas =
      c.scheme.scheme == Scheme::DipCa && !c.grid_gammas.empty() ? c.grid_gammas : std::vector<double>{c.scheme.gamma};

  std::vector<SweepPoint> points(gammas.size() * c.grid_densities.size());
  std::vector<double> hit_rates(points.size());
  parallel_for(points.size(), c.threads, [&](std::size_t i) {
    const double gamma = gammas[i / c.grid_densities.size()];
    const double density = c.grid_densities[i % c.grid_densities.size()];
    RunInputs in = make_run_inputs(c, data);
    in.scheme.gamma = gamma;
    in.scheme.input_density = density;
    in.scheme.intermediate_density = density;
    if (in.scheme.scheme == Scheme::Cats)
      in.scheme.cats_thresholds = calibrate_gate_thresholds(data.trace, data.weights, density);
    const RunReport r = simulate_run(in);
    points[i] = {density, r.throughput, r.mean_error.value_or(0.0), gamma};
    hit_rates[i] = r.hit_rate;
  });

  json j = envelope(c, "sweep");
  json rows = json::array();
  for (std::size_t i = 0; i < points.size(); ++i)
    rows.push_back({{"density", points[i].density}, {"gamma", points[i].gamma},
                    {"throughput_tok_s", points[i].throughput}, {"hit_rate", hit_rates[i]},
                    {"mean_error", points[i].error}});
  j["rows"] = rows;
  json summary = json::array();
  for (double b : c.budgets) {
    json entry = {{"budget", budget_value(b)}};
    try {
      const SweepPoint best = throughput_at_error(points, b);
      entry["feasible"] = true;
      entry["throughput_tok_s"] = best.throughput;
      entry["density"] = best.density;
      entry["gamma"] = best.gamma;
      entry["mean_error"] = best.error;
    } catch (const std::runtime_error&) {
      entry["feasible"] = false;
    }
    summary.push_back(entry);
  }
  j["summary"] = summary;
  return j;
}

json gamma_sweep_experiment(const ExperimentConfig& cfg) {
  if (cfg.grid_gammas.empty() || cfg.grid_densities.empty())
    throw ConfigError("gamma-sweep needs grid.gammas and grid.densities");
  if (cfg.policy == PolicyKind::Belady) throw ConfigError("gamma-sweep runs DIP-CA, which cannot use Belady");
  ExperimentConfig c = cfg;
  c.scheme.scheme = Scheme::DipCa;
  const LoadedInputs data = load_inputs(c);
  const auto rows = gamma_sweep(make_run_inputs(c, data), c.grid_gammas, c.grid_densities, c.threads);
  json j = envelope(c, "gamma-sweep");
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"gamma", r.gamma}, {"density", r.density}, {"throughput_tok_s", r.throughput},
                   {"hit_rate", r.hit_rate}, {"mean_error", optional_number(r.error)}});
  j["rows"] = out;
  return j;
}

json calibrate_allocation_experiment(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.scheme.scheme = Scheme::Dip;
  const LoadedInputs data = load_inputs(c);
  const auto layer = static_cast<std::size_t>(c.allocation_layer);
  const MlpWeightsd& w = data.weights.at(layer);
  const Eigen::MatrixXd& inputs = data.trace.layers.at(layer);

  std::vector<std::pair<double, double>> grid;
  for (double mid : c.allocation_levels)
    for (double in : c.allocation_levels) grid.emplace_back(mid, in);
  const auto points = sweep_density_allocation(w, inputs, grid, c.threads);
  const auto front = pareto_front(points);
  const AllocationModel model = fit_allocation_model(front);
  const Allocation alloc = optimal_allocation(model, c.allocation_target, w.d_model(), w.d_ff());

  auto point_json = [](const DensityPoint& p) {
    return json{{"input_density", p.input_density}, {"intermediate_density", p.intermediate_density},
                {"memory", p.memory}, {"error", p.error}};
  };
  json j = envelope(c, "calibrate-allocation");
  json pts = json::array();
  for (const auto& p : points) pts.push_back(point_json(p));
  json fr = json::array();
  for (const auto& p : front) fr.push_back(point_json(p));
  j["points"] = pts;
  j["pareto_front"] = fr;
  j["model"] = {{"input_slope", model.input_slope},
                {"input_intercept", model.input_intercept},
                {"intermediate_slope", model.intermediate_slope},
                {"intermediate_intercept", model.intermediate_intercept}};
  j["allocation"] = {{"target", c.allocation_target},
                     {"k_in", alloc.k_in},
                     {"k_mid", alloc.k_mid},
                     {"input_density", alloc.input_density},
                     {"intermediate_density", alloc.intermediate_density},
                     {"memory", alloc.memory},
                     {"relative_memory_gap", std::abs(alloc.memory - c.allocation_target) / c.allocation_target}};
  return j;
}

int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    err << "simulation error: " << e.what() << "\n";
    return kSimulationError;
  }
}

int cmd_run(const std::filesystem::path& config, const Overrides& o, std::ostream& err) {
  return guarded(
      [&] {
        const auto cfg = load_with(config, o);
        const auto out = require_output(cfg);
        write_json(out, run_experiment(cfg));
      },
      err);
}

int cmd_sweep(const std::filesystem::path& config, const Overrides& o, std::ostream& err) {
  return guarded(
      [&] {
        const auto cfg = load_with(config, o);
        const auto out = require_output(cfg);
        write_json(out, sweep_experiment(cfg));
      },
      err);
}

int cmd_gamma_sweep(const std::filesystem::path& config, const Overrides& o, std::ostream& err) {
  return guarded(
      [&] {
        const auto cfg = load_with(config, o);
        const auto out = require_output(cfg);
        write_json(out, gamma_sweep_experiment(cfg));
      },
      err);
}

int cmd_calibrate_allocation(const std::filesystem::path& config, const Overrides& o, std::ostream& err) {
  return guarded(
      [&] {
        const auto cfg = load_with(config, o);
        const auto out = require_output(cfg);
        write_json(out, calibrate_allocation_experiment(cfg));
      },
      err);
}

int cmd_gen_trace(const std::filesystem::path& config, const Overrides& o,
                  const std::optional<std::filesystem::path>& weights_out, std::ostream& err) {
  return guarded(
      [&] {
        const auto cfg = load_with(config, o);
        if (!cfg.trace.synthetic) throw ConfigError("gen-trace needs trace.synthetic");
        const auto out = require_output(cfg);
        write_trace(out, generate_synthetic_trace(*cfg.trace.synthetic));
        if (weights_out) {
          const auto& g = cfg.model;
          write_mlp_weights(*weights_out, generate_synthetic_weights(g.num_layers, g.d_model, g.d_ff, cfg.weights.seed));
        }
      },
      err);
}

}  // namespace dipsim::cli
