#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dipsim/cli/commands.hpp"
#include "dipsim/cli/config.hpp"
#include "dipsim/traces/trace_io.hpp"

namespace dipsim::cli {
namespace {

namespace fs = std::filesystem;

json small_config() {
  return json::parse(R"({
    "seed": 3,
    "model": {"num_layers": 2, "d_model": 16, "d_ff": 48, "bytes_per_weight": 0.5, "static_bytes": 100},
    "hardware": {"dram_capacity": 1000, "dram_bandwidth": 60, "flash_bandwidth": 1},
    "trace": {"synthetic": {"num_tokens": 8, "sigma": [1.5]}},
    "scheme": {"name": "dip-ca", "density": 0.25, "gamma": 0.2},
    "policy": "lfu",
    "kernel_eval": true,
    "grid": {"densities": [0.25, 0.5, 1.0], "gammas": [0.2, 1.0]},
    "allocation": {"levels": [0.25, 0.5, 0.75, 1.0], "target": 0.5},
    "output": "out.json"
  })");
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("dipsim_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& j, const std::string& name = "cfg.json") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  // Runs the binary with `args`; stderr is captured to a file in the temp dir.
  int cli(const std::string& args) const {
    const std::string cmd = std::string("\"") + DIPSIM_CLI_PATH + "\" " + args + " 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return slurp(dir_ / "stderr.txt"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  static json without_timestamp(json j) {
    j.erase("generated_at");
    return j;
  }

  fs::path dir_;
};

TEST_F(CliTest, RunWritesReport) {
  const auto cfg = write_config(small_config());
  ASSERT_EQ(cli("run --config \"" + cfg.string() + "\""), kOk) << stderr_text();
  const json r = read_json(dir_ / "out.json");
  EXPECT_EQ(r.at("kind"), "run");
  EXPECT_EQ(r.at("schema_version"), kSchemaVersion);
  EXPECT_EQ(r.at("metrics").at("num_tokens"), 8);
  EXPECT_TRUE(r.at("generated_at").is_string());
  EXPECT_EQ(r.at("config").at("scheme").at("name"), "dip-ca");
}

TEST_F(CliTest, OutOfRangeDensityIsValidationError) {
  json j = small_config();
  j["scheme"]["density"] = 1.3;
  const auto cfg = write_config(j);
  EXPECT_EQ(cli("run --config \"" + cfg.string() + "\""), kValidationError);
  EXPECT_NE(stderr_text().find("density"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "out.json"));
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST_F(CliTest, UnknownKeysRejected) {
  json j = small_config();
  j["model"]["d_modle"] = 16;
  EXPECT_THROW(parse_config(j), ConfigError);
  json k = small_config();
  k["polcy"] = "lru";
  EXPECT_EQ(cli("run --config \"" + write_config(k).string() + "\""), kValidationError);
}

TEST_F(CliTest, BeladyWithCacheAwareSchemeRejected) {
  json j = small_config();
  j["policy"] = "belady";
  EXPECT_EQ(cli("run --config \"" + write_config(j).string() + "\""), kValidationError);
  j["scheme"]["name"] = "dip";
  EXPECT_EQ(cli("run --config \"" + write_config(j).string() + "\""), kOk) << stderr_text();
}

TEST_F(CliTest, StaticLargerThanDramIsSimulationError) {
  json j = small_config();
  j["model"]["static_bytes"] = 5000;
  EXPECT_EQ(cli("run --config \"" + write_config(j).string() + "\""), kSimulationError);
  EXPECT_FALSE(fs::exists(dir_ / "out.json"));
}

TEST_F(CliTest, IoFailuresExitThree) {
  json j = small_config();
  j["output"] = (dir_ / "no_such_dir" / "out.json").string();
  EXPECT_EQ(cli("run --config \"" + write_config(j).string() + "\""), kIoError);

  std::ostringstream err;
  EXPECT_EQ(cmd_run(dir_ / "missing.json", {}, err), kIoError);
  EXPECT_FALSE(err.str().empty());
}

TEST_F(CliTest, MissingTraceFileIsReported) {
  json j = small_config();
  j["trace"] = {{"file", "absent.dstr"}};
  EXPECT_NE(cli("run --config \"" + write_config(j).string() + "\""), kOk);
  EXPECT_NE(stderr_text().find("absent.dstr"), std::string::npos);
}

TEST_F(CliTest, MalformedJsonIsValidationError) {
  const fs::path p = dir_ / "bad.json";
  std::ofstream(p) << "{\"seed\": ";
  EXPECT_EQ(cli("run --config \"" + p.string() + "\""), kValidationError);
}

TEST_F(CliTest, ReRunsAreIdenticalApartFromTimestamp) {
  const auto cfg = write_config(small_config());
  for (const std::string verb : {"run", "sweep", "gamma-sweep", "calibrate-allocation"}) {
    ASSERT_EQ(cli(verb + " --config \"" + cfg.string() + "\" --out \"" + (dir_ / "a.json").string() + "\""), kOk)
        << verb << ": " << stderr_text();
    ASSERT_EQ(cli(verb + " --config \"" + cfg.string() + "\" --out \"" + (dir_ / "b.json").string() + "\""), kOk);
    const json a = read_json(dir_ / "a.json");
    const json b = read_json(dir_ / "b.json");
    EXPECT_EQ(without_timestamp(a).dump(), without_timestamp(b).dump()) << verb;
  }
}

TEST_F(CliTest, ThreadCountDoesNotChangeSweep) {
  const auto cfg = write_config(small_config());
  ASSERT_EQ(cli("sweep --config \"" + cfg.string() + "\" --threads 1 --out \"" + (dir_ / "a.json").string() + "\""), kOk);
  ASSERT_EQ(cli("sweep --config \"" + cfg.string() + "\" --threads 4 --out \"" + (dir_ / "b.json").string() + "\""), kOk);
  EXPECT_EQ(read_json(dir_ / "a.json").at("rows").dump(), read_json(dir_ / "b.json").at("rows").dump());
}

TEST_F(CliTest, SeedOverrideChangesTrace) {
  const auto cfg = write_config(small_config());
  ASSERT_EQ(cli("run --config \"" + cfg.string() + "\" --out \"" + (dir_ / "a.json").string() + "\""), kOk);
  ASSERT_EQ(cli("run --config \"" + cfg.string() + "\" --seed 99 --out \"" + (dir_ / "b.json").string() + "\""), kOk);
  const json a = read_json(dir_ / "a.json");
  const json b = read_json(dir_ / "b.json");
  EXPECT_EQ(b.at("config").at("seed"), 99);
  EXPECT_NE(a.at("metrics").dump(), b.at("metrics").dump());
}

TEST_F(CliTest, GenTraceIsDeterministicAndReadable) {
  json j = small_config();
  const auto cfg = write_config(j);
  const fs::path t1 = dir_ / "t1.dstr", t2 = dir_ / "t2.dstr", w = dir_ / "w.dwts";
  ASSERT_EQ(cli("gen-trace --config \"" + cfg.string() + "\" --out \"" + t1.string() + "\" --weights-out \"" +
                w.string() + "\""),
            kOk)
      << stderr_text();
  ASSERT_EQ(cli("gen-trace --config \"" + cfg.string() + "\" --out \"" + t2.string() + "\""), kOk);
  EXPECT_EQ(slurp(t1), slurp(t2));

  const ActivationTrace t = read_activation_trace(t1);
  EXPECT_EQ(t.num_layers(), 2);
  EXPECT_EQ(t.d_model, 16);
  EXPECT_EQ(t.num_tokens(), 8);
  EXPECT_EQ(read_mlp_weights(w).size(), 2u);

  // A run on the written files matches the in-memory synthetic run.
  ASSERT_EQ(cli("run --config \"" + cfg.string() + "\" --out \"" + (dir_ / "syn.json").string() + "\""), kOk);
  j["trace"] = {{"file", t1.string()}};
  j["weights"] = {{"file", w.string()}};
  ASSERT_EQ(cli("run --config \"" + write_config(j, "files.json").string() + "\" --out \"" +
                (dir_ / "file.json").string() + "\""),
            kOk)
      << stderr_text();
  EXPECT_EQ(read_json(dir_ / "syn.json").at("metrics").dump(), read_json(dir_ / "file.json").at("metrics").dump());
}

TEST_F(CliTest, GenTraceWithZeroTokens) {
  json j = small_config();
  j["trace"]["synthetic"]["num_tokens"] = 0;
  const fs::path t = dir_ / "empty.dstr";
  ASSERT_EQ(cli("gen-trace --config \"" + write_config(j).string() + "\" --out \"" + t.string() + "\""), kOk);
  const ActivationTrace tr = read_activation_trace(t);
  EXPECT_EQ(tr.num_tokens(), 0);
  EXPECT_EQ(tr.d_ff, 48);
}

TEST_F(CliTest, SinglePointSweepHasOneRow) {
  json j = small_config();
  j["scheme"]["name"] = "dip";
  j["grid"] = {{"densities", {0.5}}};
  ExperimentConfig c = parse_config(j, dir_);
  const json r = sweep_experiment(c);
  ASSERT_EQ(r.at("rows").size(), 1u);
  EXPECT_DOUBLE_EQ(r.at("rows")[0].at("density").get<double>(), 0.5);
}

TEST_F(CliTest, SweepGammaOneRowsMatchDip) {
  json j = small_config();
  const json ca = sweep_experiment(parse_config(j, dir_));
  j["scheme"]["name"] = "dip";
  const json dip = sweep_experiment(parse_config(j, dir_));
  std::size_t matched = 0;
  for (const auto& row : ca.at("rows")) {
    if (row.at("gamma").get<double>() != 1.0) continue;
    for (const auto& d : dip.at("rows"))
      if (d.at("density") == row.at("density")) {
        EXPECT_DOUBLE_EQ(row.at("throughput_tok_s").get<double>(), d.at("throughput_tok_s").get<double>());
        EXPECT_DOUBLE_EQ(row.at("mean_error").get<double>(), d.at("mean_error").get<double>());
        ++matched;
      }
  }
  EXPECT_EQ(matched, 3u);
}

TEST_F(CliTest, InfiniteBudgetPicksMaxThroughput) {
  json j = small_config();
  j["budgets"] = {0.0, "inf"};
  const json r = sweep_experiment(parse_config(j, dir_));
  double best = 0.0;
  for (const auto& row : r.at("rows")) best = std::max(best, row.at("throughput_tok_s").get<double>());
  const auto& summary = r.at("summary");
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[1].at("budget"), "inf");
  EXPECT_DOUBLE_EQ(summary[1].at("throughput_tok_s").get<double>(), best);
  // Only the dense point has zero error.
  ASSERT_TRUE(summary[0].at("feasible").get<bool>());
  EXPECT_DOUBLE_EQ(summary[0].at("density").get<double>(), 1.0);
}

TEST_F(CliTest, ReportEmbedsResolvedConfig) {
  json j = small_config();
  j["hardware"] = {{"preset", "a18-dram-2gb"}};
  j["model"] = {{"num_layers", 2}, {"d_model", 16}, {"d_ff", 48}};
  const json r = run_experiment(parse_config(j, dir_));
  const json& hw = r.at("config").at("hardware");
  EXPECT_EQ(hw.at("preset"), "a18-dram-2gb");
  EXPECT_DOUBLE_EQ(hw.at("dram_capacity").get<double>(), 2e9);
  EXPECT_DOUBLE_EQ(hw.at("flash_bandwidth").get<double>(), 1e9);
  // Re-parsing the embedded config reproduces the report.
  json again = r.at("config");
  const json r2 = run_experiment(parse_config(again, dir_));
  EXPECT_EQ(without_timestamp(r).dump(), without_timestamp(r2).dump());
}

TEST_F(CliTest, ModelPresetsResolve) {
  for (const auto& p : model_presets()) {
    json j = {{"model", {{"preset", p.name}}}, {"trace", {{"synthetic", {{"num_tokens", 1}}}}}};
    const ExperimentConfig c = parse_config(j, dir_);
    EXPECT_EQ(c.model.d_model, p.geo.d_model) << p.name;
    EXPECT_GT(c.model.static_bytes, 0.0) << p.name;
  }
  json bad = {{"model", {{"preset", "no-such-model"}}}};
  EXPECT_THROW(parse_config(bad, dir_), ConfigError);
  json bad_hw = {{"hardware", {{"preset", "no-such-device"}}}};
  EXPECT_THROW(parse_config(bad_hw, dir_), ConfigError);
}

TEST_F(CliTest, WriteJsonIsAtomic) {
  const fs::path p = dir_ / "r.json";
  std::ofstream(p) << "old";
  write_json(p, json{{"a", 1}});
  EXPECT_EQ(read_json(p).at("a"), 1);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_)) files += e.is_regular_file() ? 1 : 0;
  EXPECT_EQ(files, 1u);  // no temp left behind
  EXPECT_THROW(write_json(dir_ / "missing" / "r.json", json{}), IoError);
}

TEST_F(CliTest, CalibrateAllocationReport) {
  const json r = calibrate_allocation_experiment(parse_config(small_config(), dir_));
  EXPECT_EQ(r.at("points").size(), 16u);
  EXPECT_GE(r.at("pareto_front").size(), 1u);
  const json& a = r.at("allocation");
  EXPECT_GE(a.at("k_in").get<int>(), 1);
  EXPECT_LE(a.at("k_in").get<int>(), 16);
  EXPECT_LE(a.at("k_mid").get<int>(), 48);
  const double mem = a.at("memory").get<double>();
  EXPECT_NEAR(a.at("relative_memory_gap").get<double>(), std::abs(mem - 0.5) / 0.5, 1e-12);
}

TEST_F(CliTest, UnknownVerbOrMissingConfig) {
  EXPECT_EQ(cli("frobnicate"), kValidationError);
  EXPECT_EQ(cli("run"), kValidationError);
}

}  // namespace
}  // namespace dipsim::cli
