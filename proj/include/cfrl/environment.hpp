#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cfrl/policy.hpp"
#include "cfrl/random.hpp"
#include "cfrl/regression.hpp"
#include "cfrl/trajectory.hpp"

namespace cfrl {

/// One step's worth of exogenous randomness, materialized so the same draw can
/// be applied to every counterfactual arm. Synthetic environments consume the
/// gaussian fields; simulated environments consume the residual-bank index.
struct EnvNoise {
    Eigen::VectorXd state_noise;
    double reward_noise = 0.0;
    std::uint64_t bank_index = 0;
};

/// Common sampler-facing surface of synthetic and simulated environments.
/// All stochasticity flows through EnvNoise values drawn from an explicit Rng,
/// so rollouts are pure functions of (environment, inputs, seed).
class EnvironmentModel {
public:
    virtual ~EnvironmentModel() = default;
    virtual int state_dim() const = 0;
    virtual int z_dim() const = 0;
    virtual int num_actions() const = 0;
    virtual const std::vector<Eigen::VectorXd>& z_space() const = 0;

    virtual EnvNoise draw_initial_noise(Rng& rng) const = 0;
    virtual EnvNoise draw_step_noise(Rng& rng) const = 0;

    virtual Eigen::VectorXd initial_state(const Eigen::VectorXd& z, const EnvNoise& noise) const = 0;
    virtual std::pair<Eigen::VectorXd, double> step(const Eigen::VectorXd& z,
                                                    const Eigen::VectorXd& x, int action,
                                                    const EnvNoise& noise) const = 0;

    /// Conditional-mean initial state, used to build counterfactual starting
    /// points with the additive-residual rule.
    virtual Eigen::VectorXd initial_mean(const Eigen::VectorXd& z) const = 0;
};

struct NoiseSpec {
    enum class Family { normal } family = Family::normal;
    double state_sd = 0.0;
    double reward_sd = 0.0;
};

/// Environment with caller-supplied closed-form dynamics. Transition and
/// reward functions must be deterministic given their noise argument.
class SyntheticEnvironment final : public EnvironmentModel {
public:
    using InitialFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& z,
                                                    const Eigen::VectorXd& noise)>;
    using TransitionFn = std::function<Eigen::VectorXd(
        const Eigen::VectorXd& z, const Eigen::VectorXd& x, int action,
        const Eigen::VectorXd& noise)>;
    using RewardFn = std::function<double(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                          int action, double noise)>;

    SyntheticEnvironment(int d_x, int d_z, int num_actions, std::vector<Eigen::VectorXd> z_space,
                         InitialFn initial_fn, TransitionFn transition_fn, RewardFn reward_fn,
                         NoiseSpec noise);

    int state_dim() const override { return d_x_; }
    int z_dim() const override { return d_z_; }
    int num_actions() const override { return num_actions_; }
    const std::vector<Eigen::VectorXd>& z_space() const override { return z_space_; }

    EnvNoise draw_initial_noise(Rng& rng) const override;
    EnvNoise draw_step_noise(Rng& rng) const override;
    Eigen::VectorXd initial_state(const Eigen::VectorXd& z, const EnvNoise& noise) const override;
    std::pair<Eigen::VectorXd, double> step(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                            int action, const EnvNoise& noise) const override;
    Eigen::VectorXd initial_mean(const Eigen::VectorXd& z) const override;

    const NoiseSpec& noise_spec() const { return noise_; }

private:
    int d_x_, d_z_, num_actions_;
    std::vector<Eigen::VectorXd> z_space_;
    InitialFn initial_fn_;
    TransitionFn transition_fn_;
    RewardFn reward_fn_;
    NoiseSpec noise_;
};

/// Coefficients of the bundled univariate demonstration environment:
///   x_0     = x0_base + x0_z * z + eps
///   x_{t+1} = ar * x_t + (act1_base + act1_z * z) * 1{a=1} + act0 * 1{a=0} + eps
///   r_t     = r_state * x_t + r_action * a_t + r_z * z
/// with eps ~ Normal(0, noise_sd^2) and z in {0, 1}.
struct DemoEnvParams {
    double x0_base = -0.5;
    double x0_z = 1.0;
    double ar = 0.5;
    double act1_base = 0.6;
    double act1_z = 0.4;
    double act0 = -0.3;
    double r_state = 1.0;
    double r_action = 0.5;
    double r_z = -0.25;
    double noise_sd = 0.5;
};

SyntheticEnvironment default_demo_env(const DemoEnvParams& params = {});

/// Environment learned from offline data: pooled regressions for the initial
/// state, transition, and reward, with empirical residual banks as the noise
/// model. Rows of the transition and reward banks are aligned, and one bank
/// index drives both, preserving their joint distribution.
class SimulatedEnvironment final : public EnvironmentModel {
public:
    SimulatedEnvironment(int num_actions, RegressorSpec state_spec, RegressorSpec reward_spec);

    /// Fits the three models on the batch. Returns reports in the order
    /// initial, transition, reward.
    std::vector<FitReport> fit(const TrajectoryBatch& batch);
    bool fitted() const { return fitted_; }

    int state_dim() const override;
    int z_dim() const override;
    int num_actions() const override { return num_actions_; }
    const std::vector<Eigen::VectorXd>& z_space() const override;

    EnvNoise draw_initial_noise(Rng& rng) const override;
    EnvNoise draw_step_noise(Rng& rng) const override;
    Eigen::VectorXd initial_state(const Eigen::VectorXd& z, const EnvNoise& noise) const override;
    std::pair<Eigen::VectorXd, double> step(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                            int action, const EnvNoise& noise) const override;
    Eigen::VectorXd initial_mean(const Eigen::VectorXd& z) const override;

    Eigen::VectorXd predict_transition(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                       int action) const;
    double predict_reward(const Eigen::VectorXd& z, const Eigen::VectorXd& x, int action) const;

    const Eigen::MatrixXd& initial_residuals() const { return initial_residuals_; }
    const Eigen::MatrixXd& transition_residuals() const { return transition_residuals_; }
    const Eigen::VectorXd& reward_residuals() const { return reward_residuals_; }

    nlohmann::json to_json() const;
    static SimulatedEnvironment from_json(const nlohmann::json& blob);

private:
    void require_fitted(const char* where) const;

    int num_actions_;
    RegressorSpec state_spec_, reward_spec_;
    bool fitted_ = false;
    Regressor initial_model_, transition_model_, reward_model_;
    Eigen::MatrixXd initial_residuals_;     // N x d_x
    Eigen::MatrixXd transition_residuals_;  // N*T x d_x
    Eigen::VectorXd reward_residuals_;      // N*T
    std::vector<Eigen::VectorXd> z_space_;  // distinct z values seen at fit, sorted
};

void save_simulated_env(const SimulatedEnvironment& env, const std::string& path);
SimulatedEnvironment load_simulated_env(const std::string& path);

/// Rolls every individual forward T steps under `policy`. For each individual,
/// the draw order is: initial noise, then per step one policy uniform followed
/// by one step noise. Deterministic given seed; individuals use independent
/// derived substreams.
TrajectoryBatch sample_trajectories(const EnvironmentModel& env, const Eigen::MatrixXd& zs,
                                    const Policy& policy, int horizon, std::uint64_t seed);

/// Rolls aligned counterfactual arms that share every noise draw and every
/// policy randomization draw. Arm a starts individual i at x0_arms[a].row(i)
/// with attribute zs_arms[a].row(i); only z (and its downstream consequences)
/// differs across arms.
std::vector<TrajectoryBatch> sample_counterfactual_arms(const EnvironmentModel& env,
                                                        const std::vector<Eigen::MatrixXd>& zs_arms,
                                                        const std::vector<Eigen::MatrixXd>& x0_arms,
                                                        const Policy& policy, int horizon,
                                                        std::uint64_t seed);

}  // namespace cfrl
