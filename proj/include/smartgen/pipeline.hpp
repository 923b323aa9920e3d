#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartgen/compress.hpp"
#include "smartgen/core.hpp"
#include "smartgen/error.hpp"
#include "smartgen/filter.hpp"
#include "smartgen/llm_client.hpp"
#include "smartgen/segment.hpp"
#include "smartgen/seqmodel.hpp"
#include "smartgen/simgen.hpp"
#include "smartgen/synth.hpp"

namespace smartgen {

inline constexpr std::string_view kVersion = "0.1.0";

struct SimulatorSettings {
    int days = 120;
    HouseholdContext context;
    double noise_rate = 0.02;
};

struct EvalSettings {
    bool enabled = true;
    /// Target-environment corpus; empty means simulate it (simulator
    /// input only).
    std::string test_input;
    int test_days = 60;
    /// Share of the target sequences corrupted into labeled anomalies.
    double junk_fraction = 0.3;
    /// Retention rates for the compression comparison; empty skips it.
    std::vector<double> compression_rates;
    bool equalize_steps = true;
};

struct RunConfig {
    std::uint64_t master_seed = 42;
    std::string input;  // behavior log (.csv) or dataset (.json); empty: simulator
    std::string catalog = "FR";
    std::string output_dir = "smartgen-out";
    bool mock_llm = false;
    SimulatorSettings simulator;
    SplitConfig split;
    ModelConfig model;
    double alpha = kDefaultAlpha;
    int k = 5;
    ContextTransition transition;  // empty environments are derived from the simulator
    PromptConfig prompt;
    LlmClientConfig llm;
    TofConfig tof;
    EvalSettings eval;

    /// Throws ConfigError on invalid values or missing referenced files.
    void validate() const;
};

/// INI text with sections [run] [simulator] [split] [model] [compress]
/// [hints] [transition] [prompt] [llm] [filter] [eval]. Unknown sections or
/// keys raise ConfigError.
RunConfig run_config_from_ini(const std::string& text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
std::string to_ini(const RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

/// Household context after the configured transition.
HouseholdContext target_context(const RunConfig& cfg);
/// Fills empty environment strings from the simulator contexts. Throws
/// ConfigError when they are empty and the input is a file.
ContextTransition resolved_transition(const RunConfig& cfg);

struct ArtifactRecord {
    std::string path;  // relative to the output directory
    std::string sha256;
};

struct StageRecord {
    std::string name;
    std::string status = "pending";  // pending | done | reused | skipped | failed
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::vector<ArtifactRecord> inputs;
    std::vector<ArtifactRecord> outputs;
    double seconds = 0.0;
    nlohmann::json report = nlohmann::json::object();
    std::string error;
};

struct RunManifest {
    std::string version{kVersion};
    nlohmann::json config;
    std::uint64_t master_seed = 0;
    std::vector<StageRecord> stages;
    std::string error;

    const StageRecord* stage(const std::string& name) const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Pipeline stages in execution order.
const std::vector<std::string>& stage_names();
/// Artifact file names a stage reads / writes inside the output directory.
const std::vector<std::string>& stage_inputs(const std::string& stage);
const std::vector<std::string>& stage_outputs(const std::string& stage);
/// Subcommand that runs `stage`.
std::string producing_subcommand(const std::string& stage);

/// Stage seed derived from the master seed and the stage name.
std::uint64_t stage_seed(std::uint64_t master_seed, const std::string& stage);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_hex(std::string_view bytes);

/// A stage failure tagged with the stage name and the CLI exit code class.
class StageError : public Error {
public:
    enum class Kind { config, stage, endpoint };
    StageError(std::string stage, Kind kind, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)), kind_(kind) {}
    const std::string& stage() const { return stage_; }
    Kind kind() const { return kind_; }

private:
    std::string stage_;
    Kind kind_;
};

struct PipelineOptions {
    /// Skip leading stages whose fingerprint and artifacts are unchanged.
    bool resume = false;
    /// Called before each executed stage; tests use it to inject failures.
    std::function<void(const std::string&)> before_stage;
    /// Replaces the language model (otherwise the mock or HTTP client).
    LanguageModel* model = nullptr;
};

/// Runs every stage, updating `manifest.json` in the output directory after
/// each one. On failure the partial manifest is written and StageError is
/// thrown.
RunManifest run_pipeline(const RunConfig& cfg, const PipelineOptions& opts = {});

/// Runs only the named stages against the artifacts already on disk.
/// Throws StageError (config kind) naming the producing subcommand when an
/// input artifact is missing.
RunManifest run_stages(const RunConfig& cfg, const std::vector<std::string>& stages,
                       const PipelineOptions& opts = {});

} // namespace smartgen
