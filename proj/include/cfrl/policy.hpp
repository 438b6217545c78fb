#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace cfrl {

/// A decision rule. Implementations see the individual's sensitive attribute,
/// the raw observed state history x_0..x_t (rows) and the actions taken so
/// far, and return a probability vector over actions. Implementations must be
/// deterministic; action sampling happens outside via an explicit uniform
/// draw, so counterfactual arms can share their randomization.
class Policy {
public:
    virtual ~Policy() = default;
    virtual int num_actions() const = 0;
    virtual Eigen::VectorXd action_distribution(const Eigen::VectorXd& z,
                                                const Eigen::MatrixXd& observed_states,
                                                const std::vector<int>& past_actions,
                                                int t) const = 0;
};

/// Inverse-CDF action draw from a probability vector and one uniform in [0,1).
int sample_action(const Eigen::VectorXd& probs, double u);

/// Greedy index of a score vector, ties broken toward the smaller action.
int argmax_action(const Eigen::VectorXd& scores);

/// Uniform distribution over actions at every step.
class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(int num_actions);
    int num_actions() const override { return num_actions_; }
    Eigen::VectorXd action_distribution(const Eigen::VectorXd&, const Eigen::MatrixXd&,
                                        const std::vector<int>&, int) const override;

private:
    int num_actions_;
};

/// Always plays one action.
class FixedActionPolicy final : public Policy {
public:
    FixedActionPolicy(int action, int num_actions);
    int num_actions() const override { return num_actions_; }
    Eigen::VectorXd action_distribution(const Eigen::VectorXd&, const Eigen::MatrixXd&,
                                        const std::vector<int>&, int) const override;

private:
    int action_;
    int num_actions_;
};

/// Adapter turning any (z, current state, t) -> distribution function into a
/// Policy, so externally supplied rules can be evaluated.
class FunctionPolicy final : public Policy {
public:
    using DistributionFn =
        std::function<Eigen::VectorXd(const Eigen::VectorXd& z, const Eigen::VectorXd& x_t, int t)>;
    FunctionPolicy(DistributionFn fn, int num_actions);
    int num_actions() const override { return num_actions_; }
    Eigen::VectorXd action_distribution(const Eigen::VectorXd& z,
                                        const Eigen::MatrixXd& observed_states,
                                        const std::vector<int>& past_actions,
                                        int t) const override;

private:
    DistributionFn fn_;
    int num_actions_;
};

}  // namespace cfrl
