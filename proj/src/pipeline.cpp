#include "cfrl/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"
#include "cfrl/trajectory.hpp"

namespace cfrl {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- config parsing -------------------------------------------------------

const json& require_key(const json& blob, const std::string& key, const std::string& where) {
    if (!blob.contains(key))
        throw ConfigError("config: missing required key '" + where + key + "'");
    return blob.at(key);
}

std::uint64_t require_seed(const json& blob, const std::string& where) {
    if (!blob.contains("seed"))
        throw ConfigError("config: '" + where +
                          "seed' is required (all randomness must be seeded explicitly)");
    return blob.at("seed").get<std::uint64_t>();
}

RegressorSpec parse_regressor(const json& blob, const std::string& where) {
    RegressorSpec spec;
    spec.model_type = model_type_from_string(
        require_key(blob, "model_type", where).get<std::string>());
    if (blob.contains("hidden_sizes"))
        spec.hidden_sizes = blob.at("hidden_sizes").get<std::vector<int>>();
    spec.max_epochs = blob.value("max_epochs", spec.max_epochs);
    spec.learning_rate = blob.value("learning_rate", spec.learning_rate);
    spec.tolerance = blob.value("tolerance", spec.tolerance);
    spec.seed = require_seed(blob, where);
    return spec;
}

json regressor_to_json(const RegressorSpec& spec) {
    json j;
    j["model_type"] = to_string(spec.model_type);
    j["hidden_sizes"] = spec.hidden_sizes;
    j["max_epochs"] = spec.max_epochs;
    j["learning_rate"] = spec.learning_rate;
    j["tolerance"] = spec.tolerance;
    j["seed"] = spec.seed;
    return j;
}

DemoEnvParams parse_demo_params(const json& blob) {
    DemoEnvParams p;
    p.x0_base = blob.value("x0_base", p.x0_base);
    p.x0_z = blob.value("x0_z", p.x0_z);
    p.ar = blob.value("ar", p.ar);
    p.act1_base = blob.value("act1_base", p.act1_base);
    p.act1_z = blob.value("act1_z", p.act1_z);
    p.act0 = blob.value("act0", p.act0);
    p.r_state = blob.value("r_state", p.r_state);
    p.r_action = blob.value("r_action", p.r_action);
    p.r_z = blob.value("r_z", p.r_z);
    p.noise_sd = blob.value("noise_sd", p.noise_sd);
    return p;
}

json demo_params_to_json(const DemoEnvParams& p) {
    json j;
    j["x0_base"] = p.x0_base;
    j["x0_z"] = p.x0_z;
    j["ar"] = p.ar;
    j["act1_base"] = p.act1_base;
    j["act1_z"] = p.act1_z;
    j["act0"] = p.act0;
    j["r_state"] = p.r_state;
    j["r_action"] = p.r_action;
    j["r_z"] = p.r_z;
    j["noise_sd"] = p.noise_sd;
    return j;
}

// ---- artifact paths --------------------------------------------------------

struct Paths {
    fs::path root;
    fs::path manifest() const { return root / "run_manifest.json"; }
    fs::path meta() const { return root / "data" / "meta.json"; }
    fs::path trajectory() const { return root / "data" / "trajectory.csv"; }
    fs::path train() const { return root / "data" / "train.csv"; }
    fs::path test() const { return root / "data" / "test.csv"; }
    fs::path preprocessor() const { return root / "preprocessor.json"; }
    fs::path preprocessed() const { return root / "preprocessed_train.csv"; }
    fs::path agent() const { return root / "agent.json"; }
    fs::path simulated_env() const { return root / "simulated_env.json"; }
    fs::path metrics_json() const { return root / "metrics.json"; }
    fs::path metrics_csv() const { return root / "metrics.csv"; }
    fs::path comparison_txt() const { return root / "comparison.txt"; }
    fs::path comparison_csv() const { return root / "comparison.csv"; }
    fs::path diagnostics(const std::string& stage) const {
        return root / ("diagnostics_" + stage + ".json");
    }
};

void write_json_file(const fs::path& path, const json& blob) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << blob.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return json::parse(in);
}

json fit_report_summary(const std::vector<FitReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports) {
        json j;
        j["final_loss"] = r.final_loss;
        j["epochs_run"] = r.epochs_run;
        j["converged"] = r.converged;
        arr.push_back(std::move(j));
    }
    return arr;
}

TrajectoryBatch read_artifact_batch(const Paths& paths, const fs::path& csv) {
    json meta = read_json_file(paths.meta());
    return read_trajectory_from_csv(csv.string(),
                                    meta.at("z_labels").get<std::vector<std::string>>(),
                                    meta.at("state_labels").get<std::vector<std::string>>(),
                                    meta.at("action_label").get<std::string>(),
                                    meta.at("reward_label").get<std::string>(),
                                    meta.at("id_label").get<std::string>(),
                                    meta.at("horizon").get<int>());
}

TrajectoryBatch sample_demo_data(const PipelineConfig& config) {
    SyntheticEnvironment env = default_demo_env(config.data.demo_params);
    Rng zrng(derive_seed(config.data.seed, 1));
    Eigen::MatrixXd zs(config.data.num_individuals, 1);
    for (int i = 0; i < config.data.num_individuals; ++i)
        zs(i, 0) = static_cast<double>(zrng.uniform_index(2));
    RandomPolicy behavior(env.num_actions());
    TrajectoryBatch batch = sample_trajectories(env, zs, behavior, config.data.horizon,
                                                derive_seed(config.data.seed, 2));
    batch.z_labels = {"z1"};
    batch.state_labels = {"state1"};
    return batch;
}

// ---- stages ----------------------------------------------------------------

void run_data_stage(const PipelineConfig& config, const Paths& paths) {
    TrajectoryBatch batch;
    if (config.data.source == "csv") {
        batch = read_trajectory_from_csv(config.data.path, config.data.z_labels,
                                         config.data.state_labels, config.data.action_label,
                                         config.data.reward_label, config.data.id_label,
                                         config.data.horizon);
    } else {
        batch = sample_demo_data(config);
    }
    auto [train, test] = train_test_split(batch, config.split.test_fraction, config.split.seed);

    fs::create_directories(paths.root / "data");
    json meta;
    meta["z_labels"] = batch.z_labels;
    meta["state_labels"] = batch.state_labels;
    meta["action_label"] = batch.action_label;
    meta["reward_label"] = batch.reward_label;
    meta["id_label"] = batch.id_label;
    meta["horizon"] = batch.horizon;
    meta["state_dim"] = batch.state_dim;
    write_json_file(paths.meta(), meta);
    write_trajectory_to_csv(batch, paths.trajectory().string());
    write_trajectory_to_csv(train, paths.train().string());
    write_trajectory_to_csv(test, paths.test().string());
}

void run_preprocess_stage(const PipelineConfig& config, const Paths& paths) {
    TrajectoryBatch train = read_artifact_batch(paths, paths.train());
    SequentialPreprocessor sp(config.preprocessor);
    auto out = sp.train_preprocessor(train);

    save_preprocessor(sp, paths.preprocessor().string());
    TrajectoryBatch preprocessed =
        with_replaced_states(train, out.states_tilde, sp.augmented_dim(), &out.rewards_tilde);
    for (int j = 0; j < sp.augmented_dim(); ++j)
        preprocessed.state_labels.push_back("cf_state" + std::to_string(j + 1));
    write_trajectory_to_csv(preprocessed, paths.preprocessed().string());

    json diag;
    diag["fit_reports"] = fit_report_summary(out.fit_reports);
    diag["any_nonconverged"] = out.any_nonconverged;
    write_json_file(paths.diagnostics("preprocess"), diag);
}

void run_train_stage(const PipelineConfig& config, const Paths& paths) {
    auto sp = std::make_shared<SequentialPreprocessor>(
        load_preprocessor(paths.preprocessor().string()));

    json meta = read_json_file(paths.meta());
    std::vector<std::string> cf_labels;
    for (int j = 0; j < sp->augmented_dim(); ++j)
        cf_labels.push_back("cf_state" + std::to_string(j + 1));
    TrajectoryBatch preprocessed = read_trajectory_from_csv(
        paths.preprocessed().string(), meta.at("z_labels").get<std::vector<std::string>>(),
        cf_labels, meta.at("action_label").get<std::string>(),
        meta.at("reward_label").get<std::string>(), meta.at("id_label").get<std::string>(),
        meta.at("horizon").get<int>());

    FQIConfig fqi;
    fqi.num_actions = config.preprocessor.num_actions;
    fqi.discount = config.agent.discount;
    fqi.tolerance = config.agent.tolerance;
    fqi.finite_horizon = config.agent.finite_horizon;
    fqi.reg_spec = config.agent.reg_spec;
    FQIAgent agent(fqi, sp);
    auto report = agent.train(preprocessed, config.agent.max_iter, /*preprocess=*/false);

    save_policy(agent, paths.agent().string());
    json diag;
    diag["bellman_residuals"] = report.bellman_residuals;
    diag["iterations"] = report.iterations;
    diag["converged"] = report.converged;
    diag["any_fit_nonconverged"] = report.any_fit_nonconverged;
    write_json_file(paths.diagnostics("train"), diag);
}

std::unique_ptr<EnvironmentModel> build_eval_env(const PipelineConfig& config, const Paths& paths,
                                                 bool allow_fit, json* diagnostics) {
    if (config.evaluation.environment == "synthetic")
        return std::make_unique<SyntheticEnvironment>(default_demo_env(config.data.demo_params));

    if (allow_fit) {
        TrajectoryBatch full = read_artifact_batch(paths, paths.trajectory());
        auto env = std::make_unique<SimulatedEnvironment>(
            config.preprocessor.num_actions, config.simulator.state_spec,
            config.simulator.reward_spec);
        auto reports = env->fit(full);
        if (diagnostics) (*diagnostics)["env_fit_reports"] = fit_report_summary(reports);
        save_simulated_env(*env, paths.simulated_env().string());
        return env;
    }
    return std::make_unique<SimulatedEnvironment>(
        load_simulated_env(paths.simulated_env().string()));
}

FQEConfig fqe_config_of(const PipelineConfig& config) {
    FQEConfig fqe;
    fqe.discount = config.agent.discount;
    fqe.max_iter = config.evaluation.fqe_max_iter;
    fqe.tolerance = config.evaluation.fqe_tolerance;
    fqe.reg_spec = config.evaluation.fqe_spec;
    return fqe;
}

void run_evaluate_stage(const PipelineConfig& config, const Paths& paths) {
    TrajectoryBatch test = read_artifact_batch(paths, paths.test());
    std::shared_ptr<Policy> agent = load_policy(paths.agent().string());

    json diag;
    std::unique_ptr<EnvironmentModel> env = build_eval_env(config, paths, /*allow_fit=*/true, &diag);

    ValueReport value = evaluate_value_through_fqe(test, *agent, fqe_config_of(config));
    CFMetricReport fairness = evaluate_fairness_through_model(
        *env, test, *agent, config.evaluation.seed, config.evaluation.num_reps);

    json metrics;
    metrics["schema_version"] = 1;
    metrics["value_fqe"] = value.value;
    metrics["fqe_converged"] = value.converged;
    metrics["cf_metric"] = fairness.cf_metric;
    metrics["cf_per_time"] =
        std::vector<double>(fairness.per_time.data(),
                            fairness.per_time.data() + fairness.per_time.size());
    metrics["num_individuals"] = fairness.num_individuals;
    metrics["num_arms"] = fairness.num_arms;
    json warnings = json::array();
    if (!value.converged) warnings.push_back("fqe did not converge within max_iter");
    metrics["warnings"] = warnings;
    write_json_file(paths.metrics_json(), metrics);

    std::ofstream csv(paths.metrics_csv());
    if (!csv) throw IoError("cannot open '" + paths.metrics_csv().string() + "' for writing");
    csv.precision(17);
    csv << "metric,value\n";
    csv << "value_fqe," << value.value << '\n';
    csv << "cf_metric," << fairness.cf_metric << '\n';

    diag["fqe_residuals"] = value.residual_curve;
    diag["fqe_converged"] = value.converged;
    write_json_file(paths.diagnostics("evaluate"), diag);
}

void run_compare_stage(const PipelineConfig& config, const Paths& paths) {
    TrajectoryBatch train = read_artifact_batch(paths, paths.train());
    TrajectoryBatch test = read_artifact_batch(paths, paths.test());
    std::unique_ptr<EnvironmentModel> env =
        build_eval_env(config, paths, /*allow_fit=*/!fs::exists(paths.simulated_env()), nullptr);

    FQIConfig fqi;
    fqi.num_actions = config.preprocessor.num_actions;
    fqi.discount = config.agent.discount;
    fqi.tolerance = config.agent.tolerance;
    fqi.finite_horizon = config.agent.finite_horizon;
    fqi.reg_spec = config.agent.reg_spec;

    std::vector<std::string> names = config.compare.policies;
    if (names.empty()) names = {"random", "full", "unaware", "ours"};

    std::vector<std::pair<std::string, std::shared_ptr<const Policy>>> policies;
    for (const auto& name : names) {
        std::shared_ptr<const Policy> policy;
        std::string label = name;
        if (!label.empty()) label[0] = static_cast<char>(std::toupper(label[0]));
        if (name == "ours") {
            policy = load_policy(paths.agent().string());
        } else {
            policy = make_baseline_policy(baseline_kind_from_string(name), train, fqi,
                                          config.agent.max_iter)
                         .policy;
        }
        policies.emplace_back(label, std::move(policy));
    }

    ComparisonTable table = compare_baselines(*env, test, policies, fqe_config_of(config),
                                              config.evaluation.num_reps,
                                              config.evaluation.seed);
    std::ofstream txt(paths.comparison_txt());
    if (!txt) throw IoError("cannot open '" + paths.comparison_txt().string() + "' for writing");
    txt << table.to_text();
    std::ofstream csv(paths.comparison_csv());
    if (!csv) throw IoError("cannot open '" + paths.comparison_csv().string() + "' for writing");
    csv << table.to_csv();
}

}  // namespace

// ---- public API -------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(const json& blob) {
    PipelineConfig config;
    config.schema_version = require_key(blob, "schema_version", "").get<int>();
    if (config.schema_version != 1)
        throw ConfigError("config: unsupported schema_version " +
                          std::to_string(config.schema_version));

    const json& data = require_key(blob, "data", "");
    config.data.source = require_key(data, "source", "data.").get<std::string>();
    config.data.horizon = require_key(data, "horizon", "data.").get<int>();
    if (config.data.source == "csv") {
        config.data.path = require_key(data, "path", "data.").get<std::string>();
        config.data.z_labels = require_key(data, "z_labels", "data.").get<std::vector<std::string>>();
        config.data.state_labels =
            require_key(data, "state_labels", "data.").get<std::vector<std::string>>();
        config.data.action_label = data.value("action_label", config.data.action_label);
        config.data.reward_label = data.value("reward_label", config.data.reward_label);
        config.data.id_label = data.value("id_label", config.data.id_label);
    } else if (config.data.source == "demo") {
        config.data.num_individuals = require_key(data, "num_individuals", "data.").get<int>();
        config.data.seed = require_seed(data, "data.");
        if (data.contains("demo_params"))
            config.data.demo_params = parse_demo_params(data.at("demo_params"));
    } else {
        throw ConfigError("config: data.source must be 'csv' or 'demo', got '" +
                          config.data.source + "'");
    }

    const json& split = require_key(blob, "split", "");
    config.split.test_fraction = split.value("test_fraction", 0.2);
    config.split.seed = require_seed(split, "split.");

    const json& prep = require_key(blob, "preprocessor", "");
    for (const auto& zj : require_key(prep, "z_space", "preprocessor.")) {
        std::vector<double> vals = zj.get<std::vector<double>>();
        config.preprocessor.z_space.push_back(
            Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    config.preprocessor.num_actions = require_key(prep, "num_actions", "preprocessor.").get<int>();
    config.preprocessor.cross_folds = prep.value("cross_folds", 1);
    config.preprocessor.mode = prep.value("mode", "single");
    config.preprocessor.seed = require_seed(prep, "preprocessor.");
    config.preprocessor.reg_spec =
        parse_regressor(require_key(prep, "regressor", "preprocessor."), "preprocessor.regressor.");

    const json& agent = require_key(blob, "agent", "");
    config.agent.discount = require_key(agent, "discount", "agent.").get<double>();
    config.agent.max_iter = agent.value("max_iter", 100);
    config.agent.tolerance = agent.value("tolerance", 1e-4);
    config.agent.finite_horizon = agent.value("finite_horizon", true);
    config.agent.reg_spec =
        parse_regressor(require_key(agent, "regressor", "agent."), "agent.regressor.");

    const json& sim = require_key(blob, "simulator", "");
    config.simulator.state_spec = parse_regressor(
        require_key(sim, "state_regressor", "simulator."), "simulator.state_regressor.");
    config.simulator.reward_spec = parse_regressor(
        require_key(sim, "reward_regressor", "simulator."), "simulator.reward_regressor.");

    const json& eval = require_key(blob, "evaluation", "");
    config.evaluation.environment = eval.value("environment", "simulated");
    if (config.evaluation.environment != "simulated" &&
        config.evaluation.environment != "synthetic")
        throw ConfigError("config: evaluation.environment must be 'simulated' or 'synthetic'");
    if (config.evaluation.environment == "synthetic" && config.data.source != "demo")
        throw ConfigError("config: evaluation.environment='synthetic' requires data.source='demo'");
    config.evaluation.num_reps = eval.value("num_reps", 10);
    config.evaluation.seed = require_seed(eval, "evaluation.");
    const json& fqe = require_key(eval, "fqe", "evaluation.");
    config.evaluation.fqe_max_iter = fqe.value("max_iter", 100);
    config.evaluation.fqe_tolerance = fqe.value("tolerance", 1e-4);
    config.evaluation.fqe_spec =
        parse_regressor(require_key(fqe, "regressor", "evaluation.fqe."), "evaluation.fqe.regressor.");

    if (blob.contains("compare")) {
        const json& cmp = blob.at("compare");
        config.compare.enabled = cmp.value("enabled", false);
        if (cmp.contains("policies"))
            config.compare.policies = cmp.at("policies").get<std::vector<std::string>>();
    }

    config.output_dir = blob.value("output_dir", "");
    return config;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json blob;
    try {
        blob = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(blob);
}

json PipelineConfig::to_json() const {
    json j;
    j["schema_version"] = schema_version;
    json data_j;
    data_j["source"] = data.source;
    data_j["horizon"] = data.horizon;
    if (data.source == "csv") {
        data_j["path"] = data.path;
        data_j["z_labels"] = data.z_labels;
        data_j["state_labels"] = data.state_labels;
        data_j["action_label"] = data.action_label;
        data_j["reward_label"] = data.reward_label;
        data_j["id_label"] = data.id_label;
    } else {
        data_j["num_individuals"] = data.num_individuals;
        data_j["seed"] = data.seed;
        data_j["demo_params"] = demo_params_to_json(data.demo_params);
    }
    j["data"] = std::move(data_j);
    j["split"] = {{"test_fraction", split.test_fraction}, {"seed", split.seed}};
    json prep;
    json z_space = json::array();
    for (const auto& z : preprocessor.z_space)
        z_space.push_back(std::vector<double>(z.data(), z.data() + z.size()));
    prep["z_space"] = std::move(z_space);
    prep["num_actions"] = preprocessor.num_actions;
    prep["cross_folds"] = preprocessor.cross_folds;
    prep["mode"] = preprocessor.mode;
    prep["seed"] = preprocessor.seed;
    prep["regressor"] = regressor_to_json(preprocessor.reg_spec);
    j["preprocessor"] = std::move(prep);
    j["agent"] = {{"discount", agent.discount},
                  {"max_iter", agent.max_iter},
                  {"tolerance", agent.tolerance},
                  {"finite_horizon", agent.finite_horizon},
                  {"regressor", regressor_to_json(agent.reg_spec)}};
    j["simulator"] = {{"state_regressor", regressor_to_json(simulator.state_spec)},
                      {"reward_regressor", regressor_to_json(simulator.reward_spec)}};
    j["evaluation"] = {{"environment", evaluation.environment},
                       {"num_reps", evaluation.num_reps},
                       {"seed", evaluation.seed},
                       {"fqe",
                        {{"max_iter", evaluation.fqe_max_iter},
                         {"tolerance", evaluation.fqe_tolerance},
                         {"regressor", regressor_to_json(evaluation.fqe_spec)}}}};
    j["compare"] = {{"enabled", compare.enabled}, {"policies", compare.policies}};
    j["output_dir"] = output_dir;
    return j;
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::data: return "data";
        case Stage::preprocess: return "preprocess";
        case Stage::train: return "train";
        case Stage::evaluate: return "evaluate";
        case Stage::compare: return "compare";
    }
    throw ConfigError("unknown stage");
}

Stage stage_from_string(const std::string& name) {
    if (name == "data") return Stage::data;
    if (name == "preprocess") return Stage::preprocess;
    if (name == "train") return Stage::train;
    if (name == "evaluate") return Stage::evaluate;
    if (name == "compare") return Stage::compare;
    throw ConfigError("unknown stage '" + name +
                      "' (expected data, preprocess, train, evaluate, or compare)");
}

ExitCode exit_code_for(Stage stage) {
    switch (stage) {
        case Stage::data: return ExitCode::data_error;
        case Stage::preprocess:
        case Stage::train: return ExitCode::training_error;
        case Stage::evaluate:
        case Stage::compare: return ExitCode::evaluation_error;
    }
    return ExitCode::config_error;
}

std::vector<Stage> default_stages(const PipelineConfig& config) {
    std::vector<Stage> stages{Stage::data, Stage::preprocess, Stage::train, Stage::evaluate};
    if (config.compare.enabled) stages.push_back(Stage::compare);
    return stages;
}

std::vector<StageOutcome> run_pipeline(const PipelineConfig& config,
                                       const std::vector<Stage>& stages,
                                       const std::string& output_dir, bool verbose) {
    Paths paths;
    paths.root = output_dir.empty() ? config.output_dir : output_dir;
    if (paths.root.empty())
        throw ConfigError("config: output_dir must be set (in the config file or via --output)");
    fs::create_directories(paths.root);

    // Manifest first: config echo survives even if the first stage fails.
    json manifest;
    if (fs::exists(paths.manifest())) manifest = read_json_file(paths.manifest());
    manifest["schema_version"] = 1;
    manifest["config"] = config.to_json();
    if (!manifest.contains("stages")) manifest["stages"] = json::object();
    write_json_file(paths.manifest(), manifest);

    std::vector<StageOutcome> outcomes;
    for (Stage stage : stages) {
        if (verbose) std::cout << "[cfrl] stage " << to_string(stage) << "...\n" << std::flush;
        const auto t0 = std::chrono::steady_clock::now();
        switch (stage) {
            case Stage::data: run_data_stage(config, paths); break;
            case Stage::preprocess: run_preprocess_stage(config, paths); break;
            case Stage::train: run_train_stage(config, paths); break;
            case Stage::evaluate: run_evaluate_stage(config, paths); break;
            case Stage::compare: run_compare_stage(config, paths); break;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        outcomes.push_back({stage, secs});
        manifest["stages"][to_string(stage)] = {{"seconds", secs}};
        write_json_file(paths.manifest(), manifest);
        if (verbose)
            std::cout << "[cfrl] stage " << to_string(stage) << " done in " << secs << "s\n"
                      << std::flush;
    }
    return outcomes;
}

void simulate_to_csv(const PipelineConfig& config, const std::string& path) {
    if (config.data.source != "demo")
        throw ConfigError("simulate: requires data.source='demo'");
    TrajectoryBatch batch = sample_demo_data(config);
    write_trajectory_to_csv(batch, path);
}

}  // namespace cfrl
