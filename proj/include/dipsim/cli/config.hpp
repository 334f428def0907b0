#pragma once

// Experiment configuration: JSON in, fully resolved structures out.
//
// Top-level keys (all optional unless noted):
//   seed          integer, default 0
//   trace         {"file": path} or {"synthetic": {num_tokens, num_layers, d_model,
//                 d_ff, mu, sigma, seed}}; missing dims come from "model"
//   weights       {"file": path} or {"synthetic": {"seed": n}}; default synthetic
//   model         {"preset": name} and/or num_layers, d_model, d_ff,
//                 bytes_per_weight, static_bytes (or static_gb)
//   hardware      {"preset": name} and/or dram_capacity, dram_bandwidth,
//                 flash_bandwidth (bytes) or dram_gb, dram_gbps, flash_gbps
//   scheme        {"name", "density" | "input_density" + "intermediate_density",
//                 "gamma", "cache_aware": input|intermediate|both,
//                 "predictor": {hidden, epochs, lr, target_frac, oracle}}
//   policy        lfu | lru | belady | none
//   kernel_eval   bool
//   per_token     bool
//   threads       integer
//   output        report path
//   grid          {"densities": [...], "gammas": [...]}        (sweep, gamma-sweep)
//   budgets       [number | "inf", ...]                       (sweep)
//   allocation    {"levels": [...], "target", "layer"}        (calibrate-allocation)

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipsim/core/predictor.hpp"
#include "dipsim/hwsim/hwsim.hpp"
#include "dipsim/traces/synthetic.hpp"
#include "json.hpp"

namespace dipsim::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Schema or value violation in a configuration file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TraceSource {
  std::optional<std::filesystem::path> file;
  std::optional<SyntheticTraceSpec> synthetic;
};

struct WeightsSource {
  std::optional<std::filesystem::path> file;
  std::uint64_t seed = 0;
};

struct PredictorSettings {
  PredictorTrainOptions train;
  bool oracle = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  TraceSource trace;
  WeightsSource weights;
  ModelGeometry model;
  std::string model_preset;
  HardwareConfig hardware;
  std::string hardware_preset;
  SchemeConfig scheme;
  PredictorSettings predictor;
  PolicyKind policy = PolicyKind::Lfu;
  bool kernel_eval = false;
  bool per_token = false;
  unsigned threads = 1;
  std::filesystem::path output;

  std::vector<double> grid_densities;
  std::vector<double> grid_gammas;
  std::vector<double> budgets;  // +inf allowed

  std::vector<double> allocation_levels;
  double allocation_target = 0.5;
  Index allocation_layer = 0;
};

struct HardwarePreset {
  std::string name;
  HardwareConfig hw;
};
struct ModelPreset {
  std::string name;
  ModelGeometry geo;
};

const std::vector<HardwarePreset>& hardware_presets();
const std::vector<ModelPreset>& model_presets();

/// Parses and validates; relative file paths resolve against `base_dir`.
ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully expanded config (presets resolved) for embedding in reports.
json to_json(const ExperimentConfig& c);

}  // namespace dipsim::cli
