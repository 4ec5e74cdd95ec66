#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nhl {

using json = nlohmann::json;

// One experiment invocation. `params` is a flat key -> value object holding
// every setting of the experiment after defaults, the config file and flag
// overrides have been merged (later sources win).
struct RunConfig {
    std::string experiment;
    json params;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
};

// Experiment tags in CLI order.
const std::vector<std::string>& experiment_names();

// Default settings of one experiment. Unknown tag -> "unknown_experiment".
json default_params(const std::string& experiment);

// Merges defaults <- file <- overrides. Keys not known to the experiment are
// rejected, and each value must match the type of its default. "seed" and
// "out" may appear in the file or overrides and are lifted into the config.
RunConfig resolve_config(const std::string& experiment, const json& file, const json& overrides);

// Converts a command-line value to the type of the experiment's default for
// `key` (bool, integer, real or string).
json parse_flag_value(const std::string& experiment, const std::string& key, const std::string& text);

// Artifact file name -> CSV columns.
using ArtifactSchema = std::map<std::string, std::vector<std::string>>;

struct RunOutput {
    ArtifactSchema artifacts;
    json results;  // summary numbers echoed into the manifest
};

// Creates out_dir, runs the experiment, writes its CSVs and manifest.json.
RunOutput run_experiment(const RunConfig& config);

// Per-experiment entry points; they write artifacts into config.out_dir but no
// manifest.
RunOutput run_train(const RunConfig& config);
RunOutput run_linear_mf(const RunConfig& config);
RunOutput run_kernels(const RunConfig& config);
RunOutput run_compress(const RunConfig& config);
RunOutput run_rademacher(const RunConfig& config);
RunOutput run_depth_sep(const RunConfig& config);
RunOutput run_fig2(const RunConfig& config);
RunOutput run_fig3(const RunConfig& config);
RunOutput run_lln(const RunConfig& config);
RunOutput run_degeneracy(const RunConfig& config);

inline constexpr int kSchemaVersion = 1;

// Text stored in every manifest describing how component seeds are derived.
std::string seed_derivation_note();

}  // namespace nhl
