#include "cfrl/policy.hpp"

#include <cmath>

#include "cfrl/errors.hpp"

namespace cfrl {

int sample_action(const Eigen::VectorXd& probs, double u) {
    const double total = probs.sum();
    if (!(std::abs(total - 1.0) <= 1e-9) || (probs.array() < 0.0).any())
        throw ValueError("sample_action: probabilities must be non-negative and sum to 1");
    double cum = 0.0;
    for (Eigen::Index a = 0; a < probs.size(); ++a) {
        cum += probs[a];
        if (u < cum) return static_cast<int>(a);
    }
    return static_cast<int>(probs.size() - 1);
}

int argmax_action(const Eigen::VectorXd& scores) {
    int best = 0;
    for (Eigen::Index a = 1; a < scores.size(); ++a)
        if (scores[a] > scores[best]) best = static_cast<int>(a);
    return best;
}

RandomPolicy::RandomPolicy(int num_actions) : num_actions_(num_actions) {
    if (num_actions < 1) throw ConfigError("RandomPolicy: num_actions must be >= 1");
}

Eigen::VectorXd RandomPolicy::action_distribution(const Eigen::VectorXd&, const Eigen::MatrixXd&,
                                                  const std::vector<int>&, int) const {
    return Eigen::VectorXd::Constant(num_actions_, 1.0 / static_cast<double>(num_actions_));
}

FixedActionPolicy::FixedActionPolicy(int action, int num_actions)
    : action_(action), num_actions_(num_actions) {
    if (num_actions < 1) throw ConfigError("FixedActionPolicy: num_actions must be >= 1");
    if (action < 0 || action >= num_actions)
        throw ValueError("FixedActionPolicy: action outside [0, num_actions)");
}

Eigen::VectorXd FixedActionPolicy::action_distribution(const Eigen::VectorXd&,
                                                       const Eigen::MatrixXd&,
                                                       const std::vector<int>&, int) const {
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(num_actions_);
    probs[action_] = 1.0;
    return probs;
}

FunctionPolicy::FunctionPolicy(DistributionFn fn, int num_actions)
    : fn_(std::move(fn)), num_actions_(num_actions) {
    if (!fn_) throw ConfigError("FunctionPolicy: callable must be set");
    if (num_actions < 1) throw ConfigError("FunctionPolicy: num_actions must be >= 1");
}

Eigen::VectorXd FunctionPolicy::action_distribution(const Eigen::VectorXd& z,
                                                    const Eigen::MatrixXd& observed_states,
                                                    const std::vector<int>&, int t) const {
    Eigen::VectorXd probs = fn_(z, observed_states.row(observed_states.rows() - 1).transpose(), t);
    if (probs.size() != num_actions_)
        throw ShapeError("FunctionPolicy: callable returned wrong number of probabilities");
    return probs;
}

}  // namespace cfrl
