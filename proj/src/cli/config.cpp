#include "dipsim/cli/config.hpp"

#include <cmath>
#include <fstream>

#include "dipsim/traces/trace_io.hpp"

namespace dipsim::cli {

namespace {

ModelGeometry llm_geometry(Index layers, Index d_model, Index d_ff, double total_gb) {
  ModelGeometry g{layers, d_model, d_ff, 0.5, 0.0};
  g.static_bytes = total_gb * kGB - g.mlp_bytes();
  return g;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("'") + key + "': " + e.what());
  }
}

void require_object(const json& j, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be an object");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError(std::string("unknown key '") + k + "' in " + what);
  }
}

std::vector<double> number_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError(std::string("'") + key + "' must be a number or an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (e.is_string() && (e == "inf" || e == "infinity")) {
      out.push_back(std::numeric_limits<double>::infinity());
    } else if (e.is_number()) {
      out.push_back(e.get<double>());
    } else {
      throw ConfigError(std::string("'") + key + "' entries must be numbers");
    }
  }
  return out;
}

void check_density(double d, const char* what) {
  if (!(d > 0.0 && d <= 1.0)) throw ConfigError(std::string(what) + " must be in (0, 1], got " + std::to_string(d));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

ModelGeometry parse_model(const json& j, std::string& preset_name) {
  require_object(j, "model");
  reject_unknown(j, {"preset", "num_layers", "d_model", "d_ff", "bytes_per_weight", "static_bytes", "static_gb"},
                 "model");
  ModelGeometry g;
  if (j.contains("preset")) {
    preset_name = j.at("preset").get<std::string>();
    bool found = false;
    for (const auto& p : model_presets())
      if (p.name == preset_name) {
        g = p.geo;
        found = true;
      }
    if (!found) throw ConfigError("unknown model preset '" + preset_name + "'");
  }
  g.num_layers = get_or<Index>(j, "num_layers", g.num_layers);
  g.d_model = get_or<Index>(j, "d_model", g.d_model);
  g.d_ff = get_or<Index>(j, "d_ff", g.d_ff);
  g.bytes_per_weight = get_or<double>(j, "bytes_per_weight", g.bytes_per_weight);
  g.static_bytes = get_or<double>(j, "static_bytes", g.static_bytes);
  if (j.contains("static_gb")) g.static_bytes = get_or<double>(j, "static_gb", 0.0) * kGB;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

HardwareConfig parse_hardware(const json& j, std::string& preset_name) {
  require_object(j, "hardware");
  reject_unknown(j,
                 {"preset", "dram_capacity", "dram_bandwidth", "flash_bandwidth", "dram_gb", "dram_gbps",
                  "flash_gbps"},
                 "hardware");
  HardwareConfig hw;
  preset_name = get_or<std::string>(j, "preset", "a18");
  bool found = false;
  for (const auto& p : hardware_presets())
    if (p.name == preset_name) {
      hw = p.hw;
      found = true;
    }
  if (!found) throw ConfigError("unknown hardware preset '" + preset_name + "'");
  hw.dram_capacity = get_or<double>(j, "dram_capacity", hw.dram_capacity);
  hw.dram_bandwidth = get_or<double>(j, "dram_bandwidth", hw.dram_bandwidth);
  hw.flash_bandwidth = get_or<double>(j, "flash_bandwidth", hw.flash_bandwidth);
  if (j.contains("dram_gb")) hw.dram_capacity = get_or<double>(j, "dram_gb", 0.0) * kGB;
  if (j.contains("dram_gbps")) hw.dram_bandwidth = get_or<double>(j, "dram_gbps", 0.0) * kGB;
  if (j.contains("flash_gbps")) hw.flash_bandwidth = get_or<double>(j, "flash_gbps", 0.0) * kGB;
  try {
    hw.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return hw;
}

SyntheticTraceSpec parse_synthetic(const json& j, const std::optional<ModelGeometry>& model, std::uint64_t seed) {
  require_object(j, "trace.synthetic");
  reject_unknown(j, {"num_tokens", "num_layers", "d_model", "d_ff", "mu", "sigma", "seed"}, "trace.synthetic");
  SyntheticTraceSpec s;
  if (model) {
    s.num_layers = model->num_layers;
    s.d_model = model->d_model;
    s.d_ff = model->d_ff;
  }
  s.num_tokens = get_or<Index>(j, "num_tokens", s.num_tokens);
  s.num_layers = get_or<Index>(j, "num_layers", s.num_layers);
  s.d_model = get_or<Index>(j, "d_model", s.d_model);
  s.d_ff = get_or<Index>(j, "d_ff", s.d_ff);
  if (j.contains("mu")) s.mu = number_list(j, "mu");
  if (j.contains("sigma")) s.sigma = number_list(j, "sigma");
  s.seed = get_or<std::uint64_t>(j, "seed", seed);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

CacheAwareTarget parse_ca_target(const std::string& s) {
  if (s == "input") return CacheAwareTarget::Input;
  if (s == "intermediate") return CacheAwareTarget::Intermediate;
  if (s == "both") return CacheAwareTarget::Both;
  throw ConfigError("cache_aware must be input, intermediate or both");
}

std::string ca_target_name(CacheAwareTarget t) {
  switch (t) {
    case CacheAwareTarget::Input:
      return "input";
    case CacheAwareTarget::Intermediate:
      return "intermediate";
    case CacheAwareTarget::Both:
      return "both";
  }
  return "both";
}

json budgets_json(const std::vector<double>& budgets) {
  json out = json::array();
  for (double b : budgets) {
    if (std::isinf(b)) {
      out.push_back("inf");
    } else {
      out.push_back(b);
    }
  }
  return out;
}

}  // namespace

const std::vector<HardwarePreset>& hardware_presets() {
  static const std::vector<HardwarePreset> presets{
      {"a18", {4.0 * kGB, 60.0 * kGB, 1.0 * kGB}},
      {"a18-dram-2gb", {2.0 * kGB, 60.0 * kGB, 1.0 * kGB}},
      {"a18-dram-6gb", {6.0 * kGB, 60.0 * kGB, 1.0 * kGB}},
      {"a18-flash-0.5", {4.0 * kGB, 60.0 * kGB, 0.5 * kGB}},
      {"a18-flash-2", {4.0 * kGB, 60.0 * kGB, 2.0 * kGB}},
  };
  return presets;
}

const std::vector<ModelPreset>& model_presets() {
  static const std::vector<ModelPreset> presets{
      {"phi3-medium-like", llm_geometry(40, 5120, 17920, 7.4)},
      {"phi3-mini-like", llm_geometry(32, 3072, 8192, 2.4)},
      {"llama3-8b-like", llm_geometry(32, 4096, 14336, 4.3)},
      {"mistral-7b-like", llm_geometry(32, 4096, 14336, 3.9)},
  };
  return presets;
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  require_object(j, "config");
  reject_unknown(j,
                 {"schema_version", "seed", "trace", "weights", "model", "hardware", "scheme", "policy", "kernel_eval",
                  "per_token", "threads", "output", "grid", "budgets", "allocation"},
                 "config");
  ExperimentConfig c;
  if (j.contains("schema_version") && get_or<int>(j, "schema_version", kSchemaVersion) != kSchemaVersion)
    throw ConfigError("unsupported schema_version");
  c.seed = get_or<std::uint64_t>(j, "seed", 0);

  std::optional<ModelGeometry> model;
  if (j.contains("model")) model = parse_model(j.at("model"), c.model_preset);

  const json trace = j.value("trace", json::object({{"synthetic", json::object()}}));
  require_object(trace, "trace");
  reject_unknown(trace, {"file", "synthetic"}, "trace");
  if (trace.contains("file") == trace.contains("synthetic"))
    throw ConfigError("trace needs exactly one of 'file' or 'synthetic'");
  if (trace.contains("file")) {
    c.trace.file = resolve(base_dir, trace.at("file").get<std::string>());
    if (!std::filesystem::exists(*c.trace.file)) throw ConfigError("trace file not found: " + c.trace.file->string());
  } else {
    c.trace.synthetic = parse_synthetic(trace.at("synthetic"), model, c.seed);
  }

  if (model) {
    c.model = *model;
  } else if (c.trace.synthetic) {
    c.model = {c.trace.synthetic->num_layers, c.trace.synthetic->d_model, c.trace.synthetic->d_ff, 0.5, 0.0};
  } else {
    // Header-only read for the dims.
    const auto t = read_trace(*c.trace.file);
    std::visit(
        [&](const auto& tr) {
          using T = std::decay_t<decltype(tr)>;
          if constexpr (std::is_same_v<T, ActivationTrace>) {
            c.model = {tr.num_layers(), tr.d_model, tr.d_ff, 0.5, 0.0};
          } else {
            c.model = {tr.num_layers, tr.d_model, tr.d_ff, 0.5, 0.0};
          }
        },
        t);
  }

  c.weights.seed = c.seed;
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    require_object(w, "weights");
    reject_unknown(w, {"file", "synthetic"}, "weights");
    if (w.contains("file") && w.contains("synthetic")) throw ConfigError("weights needs one of 'file' or 'synthetic'");
    if (w.contains("file")) {
      c.weights.file = resolve(base_dir, w.at("file").get<std::string>());
      if (!std::filesystem::exists(*c.weights.file))
        throw ConfigError("weights file not found: " + c.weights.file->string());
    } else if (w.contains("synthetic")) {
      c.weights.seed = get_or<std::uint64_t>(w.at("synthetic"), "seed", c.seed);
    }
  }

  c.hardware = parse_hardware(j.value("hardware", json::object()), c.hardware_preset);

  const json scheme = j.value("scheme", json::object({{"name", "dense"}}));
  require_object(scheme, "scheme");
  reject_unknown(scheme,
                 {"name", "density", "input_density", "intermediate_density", "gamma", "cache_aware", "predictor"},
                 "scheme");
  try {
    c.scheme.scheme = parse_scheme(get_or<std::string>(scheme, "name", "dense"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double density = get_or<double>(scheme, "density", 1.0);
  c.scheme.input_density = get_or<double>(scheme, "input_density", density);
  c.scheme.intermediate_density = get_or<double>(scheme, "intermediate_density", density);
  check_density(density, "scheme.density");
  check_density(c.scheme.input_density, "scheme.input_density");
  check_density(c.scheme.intermediate_density, "scheme.intermediate_density");
  c.scheme.gamma = get_or<double>(scheme, "gamma", kDefaultGamma);
  if (!(c.scheme.gamma >= 0.0 && c.scheme.gamma <= 1.0)) throw ConfigError("scheme.gamma must be in [0, 1]");
  c.scheme.ca_target = parse_ca_target(get_or<std::string>(scheme, "cache_aware", "both"));
  if (scheme.contains("predictor")) {
    const auto& p = scheme.at("predictor");
    require_object(p, "scheme.predictor");
    reject_unknown(p, {"hidden", "epochs", "lr", "target_frac", "batch_size", "oracle"}, "scheme.predictor");
    c.predictor.train.hidden = get_or<Index>(p, "hidden", c.predictor.train.hidden);
    c.predictor.train.epochs = get_or<int>(p, "epochs", c.predictor.train.epochs);
    c.predictor.train.lr = get_or<double>(p, "lr", c.predictor.train.lr);
    c.predictor.train.target_frac = get_or<double>(p, "target_frac", c.predictor.train.target_frac);
    c.predictor.train.batch_size = get_or<Index>(p, "batch_size", c.predictor.train.batch_size);
    c.predictor.oracle = get_or<bool>(p, "oracle", false);
    if (c.predictor.train.hidden < 1 || c.predictor.train.epochs < 0)
      throw ConfigError("scheme.predictor: hidden must be >= 1 and epochs >= 0");
    if (!(c.predictor.train.target_frac > 0 && c.predictor.train.target_frac < 1))
      throw ConfigError("scheme.predictor.target_frac must be in (0, 1)");
  }
  c.predictor.train.seed = c.seed;
  c.scheme.predictor_oracle = c.predictor.oracle;

  try {
    c.policy = parse_policy(get_or<std::string>(j, "policy", "lfu"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.policy == PolicyKind::Belady && c.scheme.scheme == Scheme::DipCa)
    throw ConfigError("policy 'belady' cannot be combined with scheme 'dip-ca' (masks depend on cache state)");

  c.kernel_eval = get_or<bool>(j, "kernel_eval", false);
  c.per_token = get_or<bool>(j, "per_token", false);
  c.threads = get_or<unsigned>(j, "threads", 1u);
  if (j.contains("output")) c.output = resolve(base_dir, j.at("output").get<std::string>());

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    require_object(g, "grid");
    reject_unknown(g, {"densities", "gammas"}, "grid");
    c.grid_densities = number_list(g, "densities");
    c.grid_gammas = number_list(g, "gammas");
    for (double d : c.grid_densities) check_density(d, "grid.densities");
    for (double gm : c.grid_gammas)
      if (!(gm >= 0.0 && gm <= 1.0)) throw ConfigError("grid.gammas must be in [0, 1]");
  }
  c.budgets = j.contains("budgets") ? number_list(j, "budgets")
                                    : std::vector<double>{0.05, 0.1, 0.2, std::numeric_limits<double>::infinity()};
  for (double b : c.budgets)
    if (!(b >= 0.0)) throw ConfigError("budgets must be >= 0");

  if (j.contains("allocation")) {
    const auto& a = j.at("allocation");
    require_object(a, "allocation");
    reject_unknown(a, {"levels", "target", "layer"}, "allocation");
    c.allocation_levels = number_list(a, "levels");
    for (double d : c.allocation_levels) check_density(d, "allocation.levels");
    c.allocation_target = get_or<double>(a, "target", 0.5);
    if (!(c.allocation_target > 0.0 && c.allocation_target < 1.0))
      throw ConfigError("allocation.target must be in (0, 1)");
    c.allocation_layer = get_or<Index>(a, "layer", 0);
    if (c.allocation_layer < 0 || c.allocation_layer >= c.model.num_layers)
      throw ConfigError("allocation.layer out of range");
  }
  if (c.allocation_levels.empty()) c.allocation_levels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = c.seed;
  if (c.trace.file) {
    j["trace"] = {{"file", c.trace.file->string()}};
  } else {
    const auto& s = *c.trace.synthetic;
    j["trace"] = {{"synthetic",
                   {{"num_tokens", s.num_tokens},
                    {"num_layers", s.num_layers},
                    {"d_model", s.d_model},
                    {"d_ff", s.d_ff},
                    {"mu", s.mu},
                    {"sigma", s.sigma},
                    {"seed", s.seed}}}};
  }
  if (c.weights.file) {
    j["weights"] = {{"file", c.weights.file->string()}};
  } else {
    j["weights"] = {{"synthetic", {{"seed", c.weights.seed}}}};
  }
  j["model"] = {{"num_layers", c.model.num_layers},
                {"d_model", c.model.d_model},
                {"d_ff", c.model.d_ff},
                {"bytes_per_weight", c.model.bytes_per_weight},
                {"static_bytes", c.model.static_bytes}};
  if (!c.model_preset.empty()) j["model"]["preset"] = c.model_preset;
  j["hardware"] = {{"preset", c.hardware_preset},
                   {"dram_capacity", c.hardware.dram_capacity},
                   {"dram_bandwidth", c.hardware.dram_bandwidth},
                   {"flash_bandwidth", c.hardware.flash_bandwidth}};
  j["scheme"] = {{"name", std::string(scheme_name(c.scheme.scheme))},
                 {"input_density", c.scheme.input_density},
                 {"intermediate_density", c.scheme.intermediate_density},
                 {"gamma", c.scheme.gamma},
                 {"cache_aware", ca_target_name(c.scheme.ca_target)},
                 {"predictor",
                  {{"hidden", c.predictor.train.hidden},
                   {"epochs", c.predictor.train.epochs},
                   {"lr", c.predictor.train.lr},
                   {"target_frac", c.predictor.train.target_frac},
                   {"batch_size", c.predictor.train.batch_size},
                   {"oracle", c.predictor.oracle}}}};
  j["policy"] = std::string(policy_name(c.policy));
  j["kernel_eval"] = c.kernel_eval;
  j["per_token"] = c.per_token;
  j["threads"] = c.threads;
  j["grid"] = {{"densities", c.grid_densities}, {"gammas", c.grid_gammas}};
  j["budgets"] = budgets_json(c.budgets);
  j["allocation"] = {{"levels", c.allocation_levels}, {"target", c.allocation_target}, {"layer", c.allocation_layer}};
  return j;
}

}  // namespace dipsim::cli
