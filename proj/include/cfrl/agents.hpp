#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cfrl/policy.hpp"
#include "cfrl/preprocessor.hpp"
#include "cfrl/regression.hpp"
#include "cfrl/trajectory.hpp"

namespace cfrl {

struct FQIConfig {
    int num_actions = 2;
    double discount = 0.9;
    RegressorSpec reg_spec;
    double tolerance = 1e-4;     // stop when max |Q change| over training tuples drops below
    bool include_z = false;      // append z to the state features
    bool finite_horizon = true;  // last transition's target is the bare reward
};

/// Fitted Q-iteration with one regressor per action. Optionally owns a
/// SequentialPreprocessor: with preprocess=true, train() fits the preprocessor
/// on the raw input and learns on its outputs; with preprocess=false the input
/// arrays are taken as already in the representation the agent acts on. A
/// trained agent is a deterministic greedy Policy, ties broken toward the
/// smaller action index.
class FQIAgent final : public Policy {
public:
    explicit FQIAgent(FQIConfig config,
                      std::shared_ptr<SequentialPreprocessor> preprocessor = nullptr);

    struct TrainingReport {
        std::vector<double> bellman_residuals;  // max |Q change| per iteration
        int iterations = 0;
        bool converged = false;
        bool any_fit_nonconverged = false;
    };

    TrainingReport train(const TrajectoryBatch& batch, int max_iter, bool preprocess);

    bool trained() const { return trained_; }
    int num_actions() const override { return config_.num_actions; }
    Eigen::VectorXd action_distribution(const Eigen::VectorXd& z,
                                        const Eigen::MatrixXd& observed_states,
                                        const std::vector<int>& past_actions,
                                        int t) const override;

    /// Q-values over actions for one feature row (already preprocessed / z-augmented).
    Eigen::VectorXd q_values(const Eigen::VectorXd& features) const;

    const FQIConfig& config() const { return config_; }
    const std::vector<Regressor>& q_models() const { return q_models_; }
    std::shared_ptr<const SequentialPreprocessor> preprocessor() const { return preprocessor_; }

    nlohmann::json to_json() const;
    static std::shared_ptr<FQIAgent> from_json(const nlohmann::json& blob);

private:
    Eigen::VectorXd feature_row(const Eigen::VectorXd& z, const Eigen::MatrixXd& observed_states,
                                const std::vector<int>& past_actions, int t) const;

    FQIConfig config_;
    std::shared_ptr<SequentialPreprocessor> preprocessor_;
    std::vector<Regressor> q_models_;
    bool trained_ = false;
    int feature_dim_ = 0;
};

enum class BaselineKind { random, full, unaware };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

struct BaselineResult {
    std::shared_ptr<Policy> policy;
    std::optional<FQIAgent::TrainingReport> report;  // absent for the random baseline
};

/// The comparison baselines: `random` is the uniform policy, `full` runs FQI
/// on raw states with z appended as a feature, `unaware` runs FQI on raw
/// states without z. None of them preprocesses.
BaselineResult make_baseline_policy(BaselineKind kind, const TrajectoryBatch& train_batch,
                                    const FQIConfig& config, int max_iter);

/// Policy (de)serialization. Kinds: "random", "fixed", "fqi" (the latter
/// embeds its Q-models and, if present, its preprocessor).
void save_policy(const Policy& policy, const std::string& path);
std::shared_ptr<Policy> load_policy(const std::string& path);
nlohmann::json policy_to_json(const Policy& policy);
std::shared_ptr<Policy> policy_from_json(const nlohmann::json& blob);

}  // namespace cfrl
