#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "dipsim/cli/config.hpp"
#include "dipsim/traces/allocation.hpp"
#include "dipsim/traces/calibration.hpp"

namespace dipsim::cli {

enum ExitCode : int { kOk = 0, kValidationError = 1, kSimulationError = 2, kIoError = 3 };

/// Command-line overrides applied on top of a loaded config.
struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool per_token = false;
};

void apply(ExperimentConfig& cfg, const Overrides& o);

struct LoadedInputs {
  ActivationTrace trace;
  std::vector<MlpWeightsd> weights;
  std::vector<Predictord> predictors;
};

/// Trace, weights and (for predictive schemes) trained predictors.
LoadedInputs load_inputs(const ExperimentConfig& cfg);

/// RunInputs pointing into `data`; CATS thresholds are calibrated on the trace.
RunInputs make_run_inputs(const ExperimentConfig& cfg, const LoadedInputs& data);

json report_json(const ExperimentConfig& cfg, const RunReport& report);
json run_experiment(const ExperimentConfig& cfg);
json sweep_experiment(const ExperimentConfig& cfg);
json gamma_sweep_experiment(const ExperimentConfig& cfg);
json calibrate_allocation_experiment(const ExperimentConfig& cfg);

/// Each verb loads the config, runs, writes the output atomically and maps
/// failures to exit codes with a diagnostic on `err`.
int cmd_run(const std::filesystem::path& config, const Overrides& o, std::ostream& err);
int cmd_sweep(const std::filesystem::path& config, const Overrides& o, std::ostream& err);
int cmd_gamma_sweep(const std::filesystem::path& config, const Overrides& o, std::ostream& err);
int cmd_calibrate_allocation(const std::filesystem::path& config, const Overrides& o, std::ostream& err);
int cmd_gen_trace(const std::filesystem::path& config, const Overrides& o,
                  const std::optional<std::filesystem::path>& weights_out, std::ostream& err);

/// Runs `body` and converts exceptions to exit codes.
int guarded(const std::function<void()>& body, std::ostream& err);

/// Writes `j` (pretty-printed, trailing newline) through a temp file + rename.
void write_json(const std::filesystem::path& path, const json& j);

/// UTC timestamp in ISO-8601, the only field allowed to differ between reruns.
std::string utc_timestamp();

}  // namespace dipsim::cli
