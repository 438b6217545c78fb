#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfrl/agents.hpp"
#include "cfrl/environment.hpp"
#include "cfrl/evaluation.hpp"
#include "cfrl/preprocessor.hpp"

namespace cfrl {

/// Exit codes of the command-line pipeline.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    data_error = 3,
    training_error = 4,
    evaluation_error = 5,
};

/// Parsed and validated pipeline configuration. Every stage that consumes
/// randomness must carry an explicit seed in the config file; missing seeds
/// are a validation error, never defaulted.
struct PipelineConfig {
    int schema_version = 1;

    struct Data {
        std::string source;  // "csv" or "demo"
        // csv source
        std::string path;
        std::vector<std::string> z_labels, state_labels;
        std::string action_label = "action", reward_label = "reward", id_label = "id";
        // demo source
        int num_individuals = 0;
        std::uint64_t seed = 0;
        DemoEnvParams demo_params;
        // shared
        int horizon = 0;
    } data;

    struct Split {
        double test_fraction = 0.2;
        std::uint64_t seed = 0;
    } split;

    PreprocessorConfig preprocessor;

    struct Agent {
        double discount = 0.9;
        int max_iter = 100;
        double tolerance = 1e-4;
        bool finite_horizon = true;
        RegressorSpec reg_spec;
    } agent;

    struct Simulator {
        RegressorSpec state_spec;
        RegressorSpec reward_spec;
    } simulator;

    struct Evaluation {
        std::string environment = "simulated";  // "simulated" or "synthetic"
        int num_reps = 10;
        std::uint64_t seed = 0;
        int fqe_max_iter = 100;
        double fqe_tolerance = 1e-4;
        RegressorSpec fqe_spec;
    } evaluation;

    struct Compare {
        bool enabled = false;
        std::vector<std::string> policies;  // e.g. random, full, unaware, ours
    } compare;

    std::string output_dir;

    static PipelineConfig from_json(const nlohmann::json& blob);
    static PipelineConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
};

/// Pipeline stages, executed in this order by a full run. Each stage consumes
/// and produces only documented file artifacts under the output directory, so
/// running stages one at a time equals the fused run.
enum class Stage { data, preprocess, train, evaluate, compare };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct StageOutcome {
    Stage stage;
    double seconds = 0.0;
};

/// Runs the given stages against `output_dir` (config.output_dir when empty).
/// Writes artifacts plus run_manifest.json (config echo, seeds, stage
/// timings). Throws typed errors; exit_code_for maps them per failing stage.
std::vector<StageOutcome> run_pipeline(const PipelineConfig& config,
                                       const std::vector<Stage>& stages,
                                       const std::string& output_dir = "",
                                       bool verbose = false);

/// All stages, honoring config.compare.enabled.
std::vector<Stage> default_stages(const PipelineConfig& config);

/// Maps a stage failure to the documented process exit code.
ExitCode exit_code_for(Stage stage);

/// Raised by run_pipeline when a stage fails, wrapping the underlying error
/// so callers can map it to the stage's exit code.
class StageFailure : public Error {
public:
    StageFailure(Stage stage, const std::string& message)
        : Error("stage " + to_string(stage) + ": " + message), stage_(stage) {}
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

/// Standalone sampler behind the `simulate` subcommand: rolls the demo
/// environment under the uniform-random behavior policy and writes the
/// trajectory CSV to `path`.
void simulate_to_csv(const PipelineConfig& config, const std::string& path);

}  // namespace cfrl
