#include "cfrl/environment.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfrl/errors.hpp"
#include "cfrl/preprocessor.hpp"  // state_action_features

namespace cfrl {

using json = nlohmann::json;

SyntheticEnvironment::SyntheticEnvironment(int d_x, int d_z, int num_actions,
                                           std::vector<Eigen::VectorXd> z_space,
                                           InitialFn initial_fn, TransitionFn transition_fn,
                                           RewardFn reward_fn, NoiseSpec noise)
    : d_x_(d_x),
      d_z_(d_z),
      num_actions_(num_actions),
      z_space_(std::move(z_space)),
      initial_fn_(std::move(initial_fn)),
      transition_fn_(std::move(transition_fn)),
      reward_fn_(std::move(reward_fn)),
      noise_(noise) {
    if (d_x_ < 1 || d_z_ < 1 || num_actions_ < 1)
        throw ConfigError("SyntheticEnvironment: dimensions and num_actions must be positive");
    if (z_space_.empty()) throw ConfigError("SyntheticEnvironment: z_space must be non-empty");
    if (!initial_fn_ || !transition_fn_ || !reward_fn_)
        throw ConfigError("SyntheticEnvironment: all dynamics functions must be set");
}

EnvNoise SyntheticEnvironment::draw_initial_noise(Rng& rng) const {
    EnvNoise noise;
    noise.state_noise = rng.normal_vector(d_x_) * noise_.state_sd;
    return noise;
}

EnvNoise SyntheticEnvironment::draw_step_noise(Rng& rng) const {
    EnvNoise noise;
    noise.state_noise = rng.normal_vector(d_x_) * noise_.state_sd;
    noise.reward_noise = rng.normal() * noise_.reward_sd;
    return noise;
}

Eigen::VectorXd SyntheticEnvironment::initial_state(const Eigen::VectorXd& z,
                                                    const EnvNoise& noise) const {
    return initial_fn_(z, noise.state_noise);
}

std::pair<Eigen::VectorXd, double> SyntheticEnvironment::step(const Eigen::VectorXd& z,
                                                              const Eigen::VectorXd& x, int action,
                                                              const EnvNoise& noise) const {
    if (action < 0 || action >= num_actions_)
        throw DomainError("SyntheticEnvironment::step: action outside [0, num_actions)");
    return {transition_fn_(z, x, action, noise.state_noise),
            reward_fn_(z, x, action, noise.reward_noise)};
}

Eigen::VectorXd SyntheticEnvironment::initial_mean(const Eigen::VectorXd& z) const {
    return initial_fn_(z, Eigen::VectorXd::Zero(d_x_));
}

SyntheticEnvironment default_demo_env(const DemoEnvParams& p) {
    std::vector<Eigen::VectorXd> z_space;
    z_space.push_back(Eigen::VectorXd::Zero(1));
    z_space.push_back(Eigen::VectorXd::Ones(1));

    SyntheticEnvironment::InitialFn initial = [p](const Eigen::VectorXd& z,
                                                  const Eigen::VectorXd& noise) {
        Eigen::VectorXd x(1);
        x[0] = p.x0_base + p.x0_z * z[0] + noise[0];
        return x;
    };
    SyntheticEnvironment::TransitionFn transition =
        [p](const Eigen::VectorXd& z, const Eigen::VectorXd& x, int action,
            const Eigen::VectorXd& noise) {
            Eigen::VectorXd next(1);
            const double action_term =
                action == 1 ? (p.act1_base + p.act1_z * z[0]) : p.act0;
            next[0] = p.ar * x[0] + action_term + noise[0];
            return next;
        };
    SyntheticEnvironment::RewardFn reward = [p](const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                                int action, double) {
        return p.r_state * x[0] + p.r_action * static_cast<double>(action) + p.r_z * z[0];
    };

    NoiseSpec noise;
    noise.state_sd = p.noise_sd;
    noise.reward_sd = 0.0;
    return SyntheticEnvironment(1, 1, 2, std::move(z_space), std::move(initial),
                                std::move(transition), std::move(reward), noise);
}

SimulatedEnvironment::SimulatedEnvironment(int num_actions, RegressorSpec state_spec,
                                           RegressorSpec reward_spec)
    : num_actions_(num_actions),
      state_spec_(std::move(state_spec)),
      reward_spec_(std::move(reward_spec)) {
    if (num_actions_ < 1) throw ConfigError("SimulatedEnvironment: num_actions must be >= 1");
}

void SimulatedEnvironment::require_fitted(const char* where) const {
    if (!fitted_) throw StateError(std::string(where) + ": environment has not been fitted");
}

int SimulatedEnvironment::state_dim() const {
    require_fitted("state_dim");
    return initial_model_.output_dim();
}

int SimulatedEnvironment::z_dim() const {
    require_fitted("z_dim");
    return initial_model_.input_dim();
}

const std::vector<Eigen::VectorXd>& SimulatedEnvironment::z_space() const {
    require_fitted("z_space");
    return z_space_;
}

std::vector<FitReport> SimulatedEnvironment::fit(const TrajectoryBatch& batch) {
    batch.validate();
    if ((batch.actions.array() >= num_actions_).any())
        throw ValueError("SimulatedEnvironment::fit: action outside [0, num_actions)");
    const int n = batch.num_individuals();
    const int t_max = batch.horizon;
    const int d_x = batch.state_dim;
    const int d_z = batch.z_dim();

    // Distinct sensitive-attribute values, sorted lexicographically.
    z_space_.clear();
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z = batch.zs.row(i).transpose();
        bool seen = false;
        for (const auto& existing : z_space_) seen = seen || existing == z;
        if (!seen) z_space_.push_back(std::move(z));
    }
    std::sort(z_space_.begin(), z_space_.end(),
              [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                                      b.data() + b.size());
              });

    std::vector<FitReport> reports;

    RegressorSpec init_spec = state_spec_;
    init_spec.seed = derive_seed(state_spec_.seed, 101);
    Eigen::MatrixXd x0 = batch.states_at(0);
    auto [init_model, init_report] = cfrl::fit(init_spec, batch.zs, x0);
    initial_model_ = std::move(init_model);
    reports.push_back(init_report);
    initial_residuals_ = x0 - initial_model_.predict(batch.zs);

    // Pooled (stationary) transition and reward models over all (i, t).
    const Eigen::Index rows = static_cast<Eigen::Index>(n) * t_max;
    const int feat_dim = d_z + d_x + num_actions_;
    Eigen::MatrixXd feats(rows, feat_dim), x_next(rows, d_x), r_now(rows, 1);
    Eigen::Index r = 0;
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < t_max; ++t, ++r) {
            feats.row(r) = state_action_features(batch.zs.row(i).transpose(), batch.state(i, t),
                                                 batch.actions(i, t), num_actions_)
                               .transpose();
            x_next.row(r) = batch.state(i, t + 1).transpose();
            r_now(r, 0) = batch.rewards(i, t);
        }
    }

    RegressorSpec trans_spec = state_spec_;
    trans_spec.seed = derive_seed(state_spec_.seed, 102);
    auto [trans_model, trans_report] = cfrl::fit(trans_spec, feats, x_next);
    transition_model_ = std::move(trans_model);
    reports.push_back(trans_report);
    transition_residuals_ = x_next - transition_model_.predict(feats);

    RegressorSpec rew_spec = reward_spec_;
    rew_spec.seed = derive_seed(reward_spec_.seed, 103);
    auto [rew_model, rew_report] = cfrl::fit(rew_spec, feats, r_now);
    reward_model_ = std::move(rew_model);
    reports.push_back(rew_report);
    reward_residuals_ = (r_now - reward_model_.predict(feats)).col(0);

    fitted_ = true;
    return reports;
}

EnvNoise SimulatedEnvironment::draw_initial_noise(Rng& rng) const {
    require_fitted("draw_initial_noise");
    EnvNoise noise;
    noise.bank_index = rng.uniform_index(static_cast<std::uint64_t>(initial_residuals_.rows()));
    return noise;
}

EnvNoise SimulatedEnvironment::draw_step_noise(Rng& rng) const {
    require_fitted("draw_step_noise");
    EnvNoise noise;
    noise.bank_index = rng.uniform_index(static_cast<std::uint64_t>(transition_residuals_.rows()));
    return noise;
}

Eigen::VectorXd SimulatedEnvironment::initial_state(const Eigen::VectorXd& z,
                                                    const EnvNoise& noise) const {
    require_fitted("initial_state");
    return initial_mean(z) +
           initial_residuals_.row(static_cast<Eigen::Index>(noise.bank_index)).transpose();
}

std::pair<Eigen::VectorXd, double> SimulatedEnvironment::step(const Eigen::VectorXd& z,
                                                              const Eigen::VectorXd& x, int action,
                                                              const EnvNoise& noise) const {
    require_fitted("step");
    if (action < 0 || action >= num_actions_)
        throw DomainError("SimulatedEnvironment::step: action outside [0, num_actions)");
    const Eigen::Index idx = static_cast<Eigen::Index>(noise.bank_index);
    Eigen::VectorXd next = predict_transition(z, x, action) +
                           transition_residuals_.row(idx).transpose();
    double reward = predict_reward(z, x, action) + reward_residuals_[idx];
    return {std::move(next), reward};
}

Eigen::VectorXd SimulatedEnvironment::initial_mean(const Eigen::VectorXd& z) const {
    require_fitted("initial_mean");
    return initial_model_.predict(z.transpose()).row(0).transpose();
}

Eigen::VectorXd SimulatedEnvironment::predict_transition(const Eigen::VectorXd& z,
                                                         const Eigen::VectorXd& x,
                                                         int action) const {
    require_fitted("predict_transition");
    return transition_model_
        .predict(state_action_features(z, x, action, num_actions_).transpose())
        .row(0)
        .transpose();
}

double SimulatedEnvironment::predict_reward(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                            int action) const {
    require_fitted("predict_reward");
    return reward_model_.predict(state_action_features(z, x, action, num_actions_).transpose())(0,
                                                                                                 0);
}

namespace {

json matrix_payload(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    j["data"] = flat;
    return j;
}

Eigen::MatrixXd matrix_from_payload(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    std::vector<double> flat = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw SchemaError("simulated env blob: matrix payload size mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[k++];
    return m;
}

}  // namespace

json SimulatedEnvironment::to_json() const {
    require_fitted("to_json");
    json j;
    j["format"] = "cfrl.simulated_env";
    j["version"] = 1;
    j["num_actions"] = num_actions_;
    j["initial_model"] = initial_model_.to_json();
    j["transition_model"] = transition_model_.to_json();
    j["reward_model"] = reward_model_.to_json();
    j["initial_residuals"] = matrix_payload(initial_residuals_);
    j["transition_residuals"] = matrix_payload(transition_residuals_);
    j["reward_residuals"] =
        std::vector<double>(reward_residuals_.data(), reward_residuals_.data() + reward_residuals_.size());
    json z_space = json::array();
    for (const auto& z : z_space_)
        z_space.push_back(std::vector<double>(z.data(), z.data() + z.size()));
    j["z_space"] = std::move(z_space);
    return j;
}

SimulatedEnvironment SimulatedEnvironment::from_json(const json& blob) {
    if (blob.value("format", "") != "cfrl.simulated_env")
        throw SchemaError("simulated env blob: missing or wrong format tag");
    if (blob.value("version", 0) != 1)
        throw SchemaError("simulated env blob: unsupported version");
    SimulatedEnvironment env(blob.at("num_actions").get<int>(), RegressorSpec{}, RegressorSpec{});
    env.initial_model_ = Regressor::from_json(blob.at("initial_model"));
    env.transition_model_ = Regressor::from_json(blob.at("transition_model"));
    env.reward_model_ = Regressor::from_json(blob.at("reward_model"));
    env.initial_residuals_ = matrix_from_payload(blob.at("initial_residuals"));
    env.transition_residuals_ = matrix_from_payload(blob.at("transition_residuals"));
    std::vector<double> rr = blob.at("reward_residuals").get<std::vector<double>>();
    env.reward_residuals_ =
        Eigen::Map<const Eigen::VectorXd>(rr.data(), static_cast<Eigen::Index>(rr.size()));
    for (const auto& zj : blob.at("z_space")) {
        std::vector<double> vals = zj.get<std::vector<double>>();
        env.z_space_.push_back(
            Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    env.fitted_ = true;
    return env;
}

void save_simulated_env(const SimulatedEnvironment& env, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << env.to_json().dump(2) << '\n';
}

SimulatedEnvironment load_simulated_env(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return SimulatedEnvironment::from_json(json::parse(in));
}

namespace {

TrajectoryBatch allocate_rollout_batch(const EnvironmentModel& env, int n, int horizon) {
    TrajectoryBatch batch;
    batch.horizon = horizon;
    batch.state_dim = env.state_dim();
    batch.zs.resize(n, env.z_dim());
    batch.states.resize(n, static_cast<Eigen::Index>(horizon + 1) * env.state_dim());
    batch.actions.resize(n, horizon);
    batch.rewards.resize(n, horizon);
    batch.ids.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) batch.ids[static_cast<std::size_t>(i)] = std::to_string(i + 1);
    return batch;
}

void set_state(TrajectoryBatch& batch, int i, int t, const Eigen::VectorXd& x) {
    batch.states.row(i).segment(static_cast<Eigen::Index>(t) * batch.state_dim, batch.state_dim) =
        x.transpose();
}

}  // namespace

TrajectoryBatch sample_trajectories(const EnvironmentModel& env, const Eigen::MatrixXd& zs,
                                    const Policy& policy, int horizon, std::uint64_t seed) {
    if (policy.num_actions() != env.num_actions())
        throw DomainError("sample_trajectories: policy and environment disagree on num_actions");
    if (zs.cols() != env.z_dim())
        throw ShapeError("sample_trajectories: z width does not match environment");
    if (horizon < 1) throw SizeError("sample_trajectories: horizon must be >= 1");

    const int n = static_cast<int>(zs.rows());
    TrajectoryBatch batch = allocate_rollout_batch(env, n, horizon);
    batch.zs = zs;

    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const Eigen::VectorXd z = zs.row(i).transpose();
        Eigen::MatrixXd history(horizon + 1, env.state_dim());
        std::vector<int> past_actions;

        Eigen::VectorXd x = env.initial_state(z, env.draw_initial_noise(rng));
        history.row(0) = x.transpose();
        set_state(batch, i, 0, x);
        for (int t = 0; t < horizon; ++t) {
            const double u = rng.uniform();
            const Eigen::VectorXd probs =
                policy.action_distribution(z, history.topRows(t + 1), past_actions, t);
            const int action = sample_action(probs, u);
            const EnvNoise noise = env.draw_step_noise(rng);
            auto [next, reward] = env.step(z, x, action, noise);
            batch.actions(i, t) = action;
            batch.rewards(i, t) = reward;
            x = std::move(next);
            history.row(t + 1) = x.transpose();
            set_state(batch, i, t + 1, x);
            past_actions.push_back(action);
        }
    }
    return batch;
}

std::vector<TrajectoryBatch> sample_counterfactual_arms(const EnvironmentModel& env,
                                                        const std::vector<Eigen::MatrixXd>& zs_arms,
                                                        const std::vector<Eigen::MatrixXd>& x0_arms,
                                                        const Policy& policy, int horizon,
                                                        std::uint64_t seed) {
    if (zs_arms.size() != x0_arms.size() || zs_arms.empty())
        throw SizeError("sample_counterfactual_arms: need matching non-empty arm lists");
    if (policy.num_actions() != env.num_actions())
        throw DomainError("sample_counterfactual_arms: policy and environment disagree on num_actions");
    const int n_arms = static_cast<int>(zs_arms.size());
    const int n = static_cast<int>(zs_arms.front().rows());
    for (int a = 0; a < n_arms; ++a) {
        if (zs_arms[static_cast<std::size_t>(a)].rows() != n ||
            x0_arms[static_cast<std::size_t>(a)].rows() != n)
            throw SizeError("sample_counterfactual_arms: arms must align by individual");
        if (zs_arms[static_cast<std::size_t>(a)].cols() != env.z_dim() ||
            x0_arms[static_cast<std::size_t>(a)].cols() != env.state_dim())
            throw ShapeError("sample_counterfactual_arms: arm column widths do not match environment");
    }
    if (horizon < 1) throw SizeError("sample_counterfactual_arms: horizon must be >= 1");

    std::vector<TrajectoryBatch> arms;
    arms.reserve(static_cast<std::size_t>(n_arms));
    for (int a = 0; a < n_arms; ++a) {
        TrajectoryBatch batch = allocate_rollout_batch(env, n, horizon);
        batch.zs = zs_arms[static_cast<std::size_t>(a)];
        arms.push_back(std::move(batch));
    }

    std::vector<Eigen::MatrixXd> histories(static_cast<std::size_t>(n_arms));
    std::vector<std::vector<int>> past(static_cast<std::size_t>(n_arms));
    std::vector<Eigen::VectorXd> x(static_cast<std::size_t>(n_arms));

    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        for (int a = 0; a < n_arms; ++a) {
            const std::size_t ai = static_cast<std::size_t>(a);
            histories[ai].resize(horizon + 1, env.state_dim());
            past[ai].clear();
            x[ai] = x0_arms[ai].row(i).transpose();
            histories[ai].row(0) = x[ai].transpose();
            set_state(arms[ai], i, 0, x[ai]);
        }
        for (int t = 0; t < horizon; ++t) {
            // One shared policy draw and one shared noise draw per (i, t).
            const double u = rng.uniform();
            const EnvNoise noise = env.draw_step_noise(rng);
            for (int a = 0; a < n_arms; ++a) {
                const std::size_t ai = static_cast<std::size_t>(a);
                const Eigen::VectorXd z = arms[ai].zs.row(i).transpose();
                const Eigen::VectorXd probs =
                    policy.action_distribution(z, histories[ai].topRows(t + 1), past[ai], t);
                const int action = sample_action(probs, u);
                auto [next, reward] = env.step(z, x[ai], action, noise);
                arms[ai].actions(i, t) = action;
                arms[ai].rewards(i, t) = reward;
                x[ai] = std::move(next);
                histories[ai].row(t + 1) = x[ai].transpose();
                set_state(arms[ai], i, t + 1, x[ai]);
                past[ai].push_back(action);
            }
        }
    }
    return arms;
}

}  // namespace cfrl
