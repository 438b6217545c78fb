#include "cfrl/agents.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

using json = nlohmann::json;

FQIAgent::FQIAgent(FQIConfig config, std::shared_ptr<SequentialPreprocessor> preprocessor)
    : config_(std::move(config)), preprocessor_(std::move(preprocessor)) {
    if (config_.num_actions < 1) throw ConfigError("FQIAgent: num_actions must be >= 1");
    if (!(config_.discount >= 0.0 && config_.discount < 1.0))
        throw ConfigError("FQIAgent: discount must lie in [0, 1)");
    if (!(config_.tolerance > 0.0)) throw ConfigError("FQIAgent: tolerance must be positive");
}

FQIAgent::TrainingReport FQIAgent::train(const TrajectoryBatch& batch, int max_iter,
                                         bool preprocess) {
    if (max_iter < 1) throw ConfigError("FQIAgent::train: max_iter must be >= 1");
    batch.validate();
    if ((batch.actions.array() >= config_.num_actions).any())
        throw ValueError("FQIAgent::train: action outside [0, num_actions)");

    TrainingReport report;
    Eigen::MatrixXd states = batch.states;
    Eigen::MatrixXd rewards = batch.rewards;
    int d_state = batch.state_dim;
    if (preprocess) {
        if (!preprocessor_)
            throw ConfigError("FQIAgent::train: preprocess=true requires a preprocessor");
        auto out = preprocessor_->train_preprocessor(batch);
        states = std::move(out.states_tilde);
        rewards = std::move(out.rewards_tilde);
        d_state = preprocessor_->augmented_dim();
        report.any_fit_nonconverged = out.any_nonconverged;
    } else if (preprocessor_ && preprocessor_->fitted() &&
               batch.state_dim != preprocessor_->augmented_dim()) {
        throw ShapeError(
            "FQIAgent::train: preprocess=false input width does not match the preprocessor's "
            "augmented dimension");
    }

    const int n = batch.num_individuals();
    const int t_max = batch.horizon;
    const Eigen::Index n_tuples = static_cast<Eigen::Index>(n) * t_max;
    feature_dim_ = d_state + (config_.include_z ? batch.z_dim() : 0);

    // Transition tuples (phi_t, a_t, r_t, phi_{t+1}), flattened over (i, t).
    Eigen::MatrixXd phi(n_tuples, feature_dim_), phi_next(n_tuples, feature_dim_);
    Eigen::VectorXd reward_vec(n_tuples);
    std::vector<int> action_of(static_cast<std::size_t>(n_tuples));
    std::vector<bool> terminal(static_cast<std::size_t>(n_tuples));
    {
        Eigen::Index row = 0;
        for (int i = 0; i < n; ++i) {
            for (int t = 0; t < t_max; ++t, ++row) {
                phi.row(row).head(d_state) =
                    states.row(i).segment(static_cast<Eigen::Index>(t) * d_state, d_state);
                phi_next.row(row).head(d_state) =
                    states.row(i).segment(static_cast<Eigen::Index>(t + 1) * d_state, d_state);
                if (config_.include_z) {
                    phi.row(row).tail(batch.z_dim()) = batch.zs.row(i);
                    phi_next.row(row).tail(batch.z_dim()) = batch.zs.row(i);
                }
                reward_vec[row] = rewards(i, t);
                action_of[static_cast<std::size_t>(row)] = batch.actions(i, t);
                terminal[static_cast<std::size_t>(row)] = (t == t_max - 1);
            }
        }
    }

    std::vector<std::vector<Eigen::Index>> strata(static_cast<std::size_t>(config_.num_actions));
    for (Eigen::Index r = 0; r < n_tuples; ++r)
        strata[static_cast<std::size_t>(action_of[static_cast<std::size_t>(r)])].push_back(r);
    for (int a = 0; a < config_.num_actions; ++a)
        if (strata[static_cast<std::size_t>(a)].empty())
            throw SizeError("FQIAgent::train: action " + std::to_string(a) +
                            " has no transitions in the data");

    // q_now / q_next hold the current iterate's values on phi / phi_next.
    Eigen::MatrixXd q_now = Eigen::MatrixXd::Zero(n_tuples, config_.num_actions);
    Eigen::MatrixXd q_next = Eigen::MatrixXd::Zero(n_tuples, config_.num_actions);

    std::vector<Regressor> models(static_cast<std::size_t>(config_.num_actions));
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd targets(n_tuples);
        for (Eigen::Index r = 0; r < n_tuples; ++r) {
            double bootstrap = 0.0;
            if (!(config_.finite_horizon && terminal[static_cast<std::size_t>(r)]) && iter > 0)
                bootstrap = q_next.row(r).maxCoeff();
            targets[r] = reward_vec[r] + config_.discount * bootstrap;
        }
        if (!targets.allFinite())
            throw ConvergenceError("FQIAgent::train: non-finite Bellman targets at iteration " +
                                   std::to_string(iter + 1));

        double delta = 0.0;
        for (int a = 0; a < config_.num_actions; ++a) {
            const auto& rows = strata[static_cast<std::size_t>(a)];
            Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), feature_dim_);
            Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), 1);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                x.row(static_cast<Eigen::Index>(k)) = phi.row(rows[k]);
                y(static_cast<Eigen::Index>(k), 0) = targets[rows[k]];
            }
            RegressorSpec spec = config_.reg_spec;
            spec.seed = derive_seed(config_.reg_spec.seed, static_cast<std::uint64_t>(a));
            auto [model, fit_report] = fit(spec, x, y);
            report.any_fit_nonconverged = report.any_fit_nonconverged || !fit_report.converged;

            Eigen::VectorXd now = model.predict(phi).col(0);
            Eigen::VectorXd next = model.predict(phi_next).col(0);
            if (!now.allFinite() || !next.allFinite())
                throw ConvergenceError("FQIAgent::train: non-finite Q values at iteration " +
                                       std::to_string(iter + 1));
            delta = std::max(delta, (now - q_now.col(a)).cwiseAbs().maxCoeff());
            q_now.col(a) = now;
            q_next.col(a) = next;
            models[static_cast<std::size_t>(a)] = std::move(model);
        }
        if (!std::isfinite(delta))
            throw ConvergenceError("FQIAgent::train: non-finite Q update at iteration " +
                                   std::to_string(iter + 1));
        report.bellman_residuals.push_back(delta);
        report.iterations = iter + 1;
        if (delta < config_.tolerance) {
            report.converged = true;
            break;
        }
    }

    q_models_ = std::move(models);
    trained_ = true;
    return report;
}

Eigen::VectorXd FQIAgent::feature_row(const Eigen::VectorXd& z,
                                      const Eigen::MatrixXd& observed_states,
                                      const std::vector<int>& past_actions, int t) const {
    Eigen::VectorXd state;
    if (preprocessor_) {
        Eigen::MatrixXd augmented =
            preprocessor_->preprocess_trajectory(z, observed_states.topRows(t + 1), past_actions);
        state = augmented.row(t).transpose();
    } else {
        state = observed_states.row(t).transpose();
    }
    if (!config_.include_z) return state;
    Eigen::VectorXd row(state.size() + z.size());
    row.head(state.size()) = state;
    row.tail(z.size()) = z;
    return row;
}

Eigen::VectorXd FQIAgent::q_values(const Eigen::VectorXd& features) const {
    if (!trained_) throw StateError("FQIAgent: agent has not been trained");
    Eigen::VectorXd q(config_.num_actions);
    for (int a = 0; a < config_.num_actions; ++a)
        q[a] = q_models_[static_cast<std::size_t>(a)].predict(features.transpose())(0, 0);
    return q;
}

Eigen::VectorXd FQIAgent::action_distribution(const Eigen::VectorXd& z,
                                              const Eigen::MatrixXd& observed_states,
                                              const std::vector<int>& past_actions, int t) const {
    if (!trained_) throw StateError("FQIAgent: agent has not been trained");
    if (observed_states.rows() < t + 1)
        throw ShapeError("FQIAgent: observed state history is shorter than t+1 rows");
    const Eigen::VectorXd q = q_values(feature_row(z, observed_states, past_actions, t));
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(config_.num_actions);
    probs[argmax_action(q)] = 1.0;
    return probs;
}

std::string to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::random: return "random";
        case BaselineKind::full: return "full";
        case BaselineKind::unaware: return "unaware";
    }
    throw ConfigError("unknown baseline kind");
}

BaselineKind baseline_kind_from_string(const std::string& name) {
    if (name == "random") return BaselineKind::random;
    if (name == "full") return BaselineKind::full;
    if (name == "unaware") return BaselineKind::unaware;
    throw ConfigError("unknown baseline '" + name + "' (expected random, full, or unaware)");
}

BaselineResult make_baseline_policy(BaselineKind kind, const TrajectoryBatch& train_batch,
                                    const FQIConfig& config, int max_iter) {
    if (kind == BaselineKind::random)
        return {std::make_shared<RandomPolicy>(config.num_actions), std::nullopt};

    FQIConfig cfg = config;
    cfg.include_z = (kind == BaselineKind::full);
    auto agent = std::make_shared<FQIAgent>(cfg);
    auto report = agent->train(train_batch, max_iter, /*preprocess=*/false);
    return {agent, report};
}

json FQIAgent::to_json() const {
    if (!trained_) throw StateError("FQIAgent::to_json: agent has not been trained");
    json j;
    j["format"] = "cfrl.policy";
    j["version"] = 1;
    j["kind"] = "fqi";
    j["num_actions"] = config_.num_actions;
    j["discount"] = config_.discount;
    j["tolerance"] = config_.tolerance;
    j["include_z"] = config_.include_z;
    j["finite_horizon"] = config_.finite_horizon;
    json models = json::array();
    for (const auto& m : q_models_) models.push_back(m.to_json());
    j["q_models"] = std::move(models);
    if (preprocessor_) j["preprocessor"] = preprocessor_->to_json();
    return j;
}

std::shared_ptr<FQIAgent> FQIAgent::from_json(const json& blob) {
    FQIConfig config;
    config.num_actions = blob.at("num_actions").get<int>();
    config.discount = blob.at("discount").get<double>();
    config.tolerance = blob.at("tolerance").get<double>();
    config.include_z = blob.at("include_z").get<bool>();
    config.finite_horizon = blob.at("finite_horizon").get<bool>();
    std::shared_ptr<SequentialPreprocessor> sp;
    if (blob.contains("preprocessor"))
        sp = std::make_shared<SequentialPreprocessor>(
            SequentialPreprocessor::from_json(blob.at("preprocessor")));
    auto agent = std::make_shared<FQIAgent>(config, sp);
    for (const auto& mj : blob.at("q_models"))
        agent->q_models_.push_back(Regressor::from_json(mj));
    if (agent->q_models_.size() != static_cast<std::size_t>(config.num_actions))
        throw SchemaError("policy blob: expected one Q-model per action");
    agent->feature_dim_ = agent->q_models_.front().input_dim();
    agent->trained_ = true;
    return agent;
}

json policy_to_json(const Policy& policy) {
    if (const auto* agent = dynamic_cast<const FQIAgent*>(&policy)) return agent->to_json();
    if (const auto* random = dynamic_cast<const RandomPolicy*>(&policy)) {
        json j;
        j["format"] = "cfrl.policy";
        j["version"] = 1;
        j["kind"] = "random";
        j["num_actions"] = random->num_actions();
        return j;
    }
    if (const auto* fixed = dynamic_cast<const FixedActionPolicy*>(&policy)) {
        json j;
        j["format"] = "cfrl.policy";
        j["version"] = 1;
        j["kind"] = "fixed";
        j["num_actions"] = fixed->num_actions();
        Eigen::VectorXd probs = fixed->action_distribution(Eigen::VectorXd(), Eigen::MatrixXd(),
                                                           {}, 0);
        Eigen::Index action = 0;
        probs.maxCoeff(&action);
        j["action"] = static_cast<int>(action);
        return j;
    }
    throw StateError("policy_to_json: this policy kind is not serializable");
}

std::shared_ptr<Policy> policy_from_json(const json& blob) {
    if (blob.value("format", "") != "cfrl.policy")
        throw SchemaError("policy blob: missing or wrong format tag");
    if (blob.value("version", 0) != 1) throw SchemaError("policy blob: unsupported version");
    const std::string kind = blob.at("kind").get<std::string>();
    if (kind == "random")
        return std::make_shared<RandomPolicy>(blob.at("num_actions").get<int>());
    if (kind == "fixed")
        return std::make_shared<FixedActionPolicy>(blob.at("action").get<int>(),
                                                   blob.at("num_actions").get<int>());
    if (kind == "fqi") return FQIAgent::from_json(blob);
    throw SchemaError("policy blob: unknown kind '" + kind + "'");
}

void save_policy(const Policy& policy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << policy_to_json(policy).dump(2) << '\n';
}

std::shared_ptr<Policy> load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return policy_from_json(json::parse(in));
}

}  // namespace cfrl
