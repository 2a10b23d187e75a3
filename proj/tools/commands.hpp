#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "options.hpp"

namespace vmfflow::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Paths touched by a run, echoed into its manifest.
struct RunRecord {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

/// Name of the manifest a command writes into its output directory.
std::string manifest_name(const std::string& command);

int run_tables(const TablesOpts& o, RunRecord& rec);
int run_selfcheck(const SelfcheckOpts& o, RunRecord& rec);
int run_train(const TrainOpts& o, RunRecord& rec);
int run_sample(const SampleOpts& o, RunRecord& rec);
int run_sweep(const SweepOpts& o, RunRecord& rec);

/// Runs `command` from its JSON config and writes the manifest into the
/// command's output directory. Returns the command's exit code.
int dispatch(const std::string& command, const nlohmann::json& config,
             const std::vector<std::string>& argv, const std::string& replay_of = {});

/// Re-runs a manifest, optionally redirecting its outputs.
int replay(const std::filesystem::path& manifest, const std::string& out);

}  // namespace vmfflow::cli
