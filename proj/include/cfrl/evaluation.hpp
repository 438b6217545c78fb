#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cfrl/environment.hpp"
#include "cfrl/policy.hpp"
#include "cfrl/regression.hpp"
#include "cfrl/trajectory.hpp"

namespace cfrl {

enum class ValueMethod { fqe, model_mc };

std::string to_string(ValueMethod method);

struct ValueReport {
    double value = 0.0;
    ValueMethod method = ValueMethod::fqe;
    std::vector<double> residual_curve;  // fqe: max |Q change| per iteration
    bool converged = false;              // fqe only
    double std_error = 0.0;              // model_mc only
};

/// Counterfactual-unfairness level in [0, 1]: mean over individuals, time
/// steps, and replicates of the fraction of unordered counterfactual-arm
/// pairs whose realized actions differ. 0 means the sensitive attribute never
/// changes an action; 1 means every arm pair disagrees at every step.
struct CFMetricReport {
    double cf_metric = 0.0;
    Eigen::VectorXd per_time;  // length T, mean disagreement at each step
    int num_individuals = 0;
    int num_arms = 0;
};

struct FQEConfig {
    RegressorSpec reg_spec;
    double discount = 0.9;
    int max_iter = 100;
    double tolerance = 1e-4;
    bool finite_horizon = true;
};

/// Fitted Q-evaluation of `policy` on offline data. Q-models are fit on
/// (state, z) features regardless of what the policy itself consumes; the
/// policy is queried along each observed trajectory (preprocessing internally
/// if it carries a preprocessor). Value is the mean over individuals of the
/// policy-weighted Q at the initial state.
ValueReport evaluate_value_through_fqe(const TrajectoryBatch& batch, const Policy& policy,
                                       const FQEConfig& config);

/// Monte-Carlo estimate of the discounted return over `num_reps` rollouts per
/// individual. std_error is the standard error over all rollouts.
ValueReport evaluate_value_through_model(const EnvironmentModel& env, const Eigen::MatrixXd& zs,
                                         const Policy& policy, int horizon, double discount,
                                         int num_reps, std::uint64_t seed);

/// Counterfactual-fairness evaluation by simulation: for every individual one
/// arm per value in the environment's z_space, the own-z arm starting at the
/// observed x_0 and the others at the additive-residual counterfactual initial
/// state built from the environment's initial-state model. Arms share
/// exogenous noise and policy randomization.
CFMetricReport evaluate_fairness_through_model(const EnvironmentModel& env,
                                               const TrajectoryBatch& batch, const Policy& policy,
                                               std::uint64_t seed, int num_reps = 10);

struct ComparisonEntry {
    std::string name;
    double value = 0.0;
    double cf_metric = 0.0;
    bool value_converged = true;
};

/// Value (FQE on `batch`) and CF metric (simulation in `env`) per named
/// policy, in the given order.
struct ComparisonTable {
    std::vector<ComparisonEntry> entries;

    /// Two-row plain-text table: one column per policy, rows for value and
    /// counterfactual unfairness level.
    std::string to_text() const;
    std::string to_csv() const;
};

ComparisonTable compare_baselines(
    const EnvironmentModel& env, const TrajectoryBatch& batch,
    const std::vector<std::pair<std::string, std::shared_ptr<const Policy>>>& policies,
    const FQEConfig& fqe_config, int fairness_reps, std::uint64_t seed);

}  // namespace cfrl
