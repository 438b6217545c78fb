#include "cfrl/preprocessor.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

using json = nlohmann::json;

namespace {

// Stream kinds for per-slot seed derivation.
constexpr std::uint64_t kInitialStream = 1;
constexpr std::uint64_t kTransitionStream = 2;
constexpr std::uint64_t kRewardStream = 3;

Eigen::VectorXd predict_row(const Regressor& reg, const Eigen::VectorXd& input) {
    return reg.predict(input.transpose()).row(0).transpose();
}

}  // namespace

Eigen::VectorXd state_action_features(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                      int action, int num_actions) {
    Eigen::VectorXd row(z.size() + x.size() + num_actions);
    row.head(z.size()) = z;
    row.segment(z.size(), x.size()) = x;
    row.tail(num_actions).setZero();
    row[z.size() + x.size() + action] = 1.0;
    return row;
}

SequentialPreprocessor::SequentialPreprocessor(PreprocessorConfig config)
    : config_(std::move(config)) {
    if (config_.z_space.empty())
        throw ConfigError("SequentialPreprocessor: z_space must be non-empty");
    d_z_ = static_cast<int>(config_.z_space.front().size());
    for (const auto& z : config_.z_space)
        if (static_cast<int>(z.size()) != d_z_)
            throw ConfigError("SequentialPreprocessor: z_space entries have mixed lengths");
    for (std::size_t a = 0; a < config_.z_space.size(); ++a)
        for (std::size_t b = a + 1; b < config_.z_space.size(); ++b)
            if (config_.z_space[a] == config_.z_space[b])
                throw ConfigError("SequentialPreprocessor: z_space entries must be distinct");
    if (config_.num_actions < 1)
        throw ConfigError("SequentialPreprocessor: num_actions must be >= 1");
    if (config_.cross_folds < 1)
        throw ConfigError("SequentialPreprocessor: cross_folds must be >= 1");
    if (config_.mode != "single")
        throw ConfigError("SequentialPreprocessor: unsupported mode '" + config_.mode +
                          "' (only 'single' is implemented)");
}

int SequentialPreprocessor::augmented_dim() const {
    return static_cast<int>(config_.z_space.size()) * d_x_;
}

int SequentialPreprocessor::own_index(const Eigen::VectorXd& z) const {
    for (std::size_t j = 0; j < config_.z_space.size(); ++j)
        if (config_.z_space[j] == z) return static_cast<int>(j);
    std::string repr = "[";
    for (Eigen::Index k = 0; k < z.size(); ++k)
        repr += (k ? "," : "") + std::to_string(z[k]);
    throw DomainError("sensitive attribute " + repr + "] is not in z_space");
}

Eigen::VectorXd SequentialPreprocessor::predict_initial(const Eigen::VectorXd& z) const {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d_x_);
    for (const auto& slot : initial_models_)
        sum += slot.fn_initial ? slot.fn_initial(z) : predict_row(slot.reg, z);
    return sum / static_cast<double>(initial_models_.size());
}

Eigen::VectorXd SequentialPreprocessor::predict_transition(int t, const Eigen::VectorXd& z,
                                                           const Eigen::VectorXd& x,
                                                           int action) const {
    const auto& slots = exact_models_ ? transition_models_.front()
                                      : transition_models_[static_cast<std::size_t>(t)];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d_x_);
    for (const auto& slot : slots) {
        if (slot.fn_dynamics) {
            sum += slot.fn_dynamics(z, x, action);
        } else {
            sum += predict_row(slot.reg, state_action_features(z, x, action, config_.num_actions));
        }
    }
    return sum / static_cast<double>(slots.size());
}

double SequentialPreprocessor::predict_reward(int t, const Eigen::VectorXd& z,
                                              const Eigen::VectorXd& x, int action) const {
    const auto& slots =
        exact_models_ ? reward_models_.front() : reward_models_[static_cast<std::size_t>(t)];
    double sum = 0.0;
    for (const auto& slot : slots) {
        if (slot.fn_dynamics) {
            sum += slot.fn_dynamics(z, x, action)[0];
        } else {
            sum +=
                predict_row(slot.reg, state_action_features(z, x, action, config_.num_actions))[0];
        }
    }
    return sum / static_cast<double>(slots.size());
}

SequentialPreprocessor::TrainOutput SequentialPreprocessor::train_preprocessor(
    const TrajectoryBatch& batch) {
    if (exact_models_)
        throw StateError("train_preprocessor: exact-model preprocessor cannot be trained");
    batch.validate();
    const int n = batch.num_individuals();
    const int t_max = batch.horizon;
    const int folds = config_.cross_folds;
    if (folds > n) throw SizeError("train_preprocessor: cross_folds exceeds individual count");
    if (batch.z_dim() != d_z_)
        throw ShapeError("train_preprocessor: batch z width does not match z_space");
    if ((batch.actions.array() >= config_.num_actions).any())
        throw ValueError("train_preprocessor: action outside [0, num_actions)");

    d_x_ = batch.state_dim;
    horizon_ = t_max;
    for (int i = 0; i < n; ++i) own_index(batch.zs.row(i).transpose());  // DomainError if absent

    // Seeded fold partition, sizes differing by at most one.
    std::vector<int> shuffled(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) shuffled[static_cast<std::size_t>(i)] = i;
    Rng fold_rng(config_.seed);
    shuffle_in_place(shuffled, fold_rng);
    fold_of_.assign(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < n; ++j)
        fold_of_[static_cast<std::size_t>(shuffled[static_cast<std::size_t>(j)])] = j % folds;

    TrainOutput out;
    auto fit_slot = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::uint64_t kind,
                        std::uint64_t stream) {
        RegressorSpec spec = config_.reg_spec;
        spec.seed = derive_seed(derive_seed(config_.seed, kind), stream);
        auto [reg, report] = fit(spec, x, y);
        out.fit_reports.push_back(report);
        out.any_nonconverged = out.any_nonconverged || !report.converged;
        ModelSlot slot;
        slot.reg = std::move(reg);
        return slot;
    };

    initial_models_.clear();
    transition_models_.assign(static_cast<std::size_t>(t_max), {});
    reward_models_.assign(static_cast<std::size_t>(t_max), {});

    const int feat_dim = d_z_ + d_x_ + config_.num_actions;
    for (int k = 0; k < folds; ++k) {
        std::vector<int> rows;
        for (int i = 0; i < n; ++i)
            if (folds == 1 || fold_of_[static_cast<std::size_t>(i)] != k) rows.push_back(i);

        const int m = static_cast<int>(rows.size());
        Eigen::MatrixXd z_in(m, d_z_), x0(m, d_x_);
        for (int r = 0; r < m; ++r) {
            z_in.row(r) = batch.zs.row(rows[static_cast<std::size_t>(r)]);
            x0.row(r) = batch.state(rows[static_cast<std::size_t>(r)], 0).transpose();
        }
        initial_models_.push_back(
            fit_slot(z_in, x0, kInitialStream, static_cast<std::uint64_t>(k)));

        for (int s = 0; s < t_max; ++s) {
            Eigen::MatrixXd feats(m, feat_dim), x_next(m, d_x_), r_now(m, 1);
            for (int r = 0; r < m; ++r) {
                const int i = rows[static_cast<std::size_t>(r)];
                feats.row(r) = state_action_features(batch.zs.row(i).transpose(), batch.state(i, s),
                                                     batch.actions(i, s), config_.num_actions)
                                   .transpose();
                x_next.row(r) = batch.state(i, s + 1).transpose();
                r_now(r, 0) = batch.rewards(i, s);
            }
            const std::uint64_t stream =
                static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(folds) +
                static_cast<std::uint64_t>(k);
            transition_models_[static_cast<std::size_t>(s)].push_back(
                fit_slot(feats, x_next, kTransitionStream, stream));
            reward_models_[static_cast<std::size_t>(s)].push_back(
                fit_slot(feats, r_now, kRewardStream, stream));
        }
    }
    fitted_ = true;

    // Preprocess each individual with its own held-out fold's models.
    const int n_z = static_cast<int>(config_.z_space.size());
    const int width = augmented_dim();
    out.states_tilde.resize(n, static_cast<Eigen::Index>(t_max + 1) * width);
    out.rewards_tilde.resize(n, t_max);

    for (int i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(fold_of_[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        const int own = own_index(z);

        auto initial_of = [&](const Eigen::VectorXd& zq) {
            return predict_row(initial_models_[k].reg, zq);
        };
        auto transition_of = [&](int s, const Eigen::VectorXd& zq, const Eigen::VectorXd& xq,
                                 int a) {
            return predict_row(transition_models_[static_cast<std::size_t>(s)][k].reg,
                               state_action_features(zq, xq, a, config_.num_actions));
        };
        auto reward_of = [&](int s, const Eigen::VectorXd& zq, const Eigen::VectorXd& xq, int a) {
            return predict_row(reward_models_[static_cast<std::size_t>(s)][k].reg,
                               state_action_features(zq, xq, a, config_.num_actions))[0];
        };

        // Counterfactual state recursion; the own-z block is the observed state.
        Eigen::MatrixXd blocks(t_max + 1, width);
        for (int j = 0; j < n_z; ++j) {
            auto block = blocks.row(0).segment(static_cast<Eigen::Index>(j) * d_x_, d_x_);
            if (j == own) {
                block = batch.state(i, 0).transpose();
            } else {
                block = (initial_of(config_.z_space[static_cast<std::size_t>(j)]) +
                         (batch.state(i, 0) - initial_of(z)))
                            .transpose();
            }
        }
        for (int t = 1; t <= t_max; ++t) {
            const int a_prev = batch.actions(i, t - 1);
            const Eigen::VectorXd resid =
                batch.state(i, t) - transition_of(t - 1, z, batch.state(i, t - 1), a_prev);
            for (int j = 0; j < n_z; ++j) {
                auto block = blocks.row(t).segment(static_cast<Eigen::Index>(j) * d_x_, d_x_);
                if (j == own) {
                    block = batch.state(i, t).transpose();
                } else {
                    const Eigen::VectorXd prev_cf =
                        blocks.row(t - 1)
                            .segment(static_cast<Eigen::Index>(j) * d_x_, d_x_)
                            .transpose();
                    block = (transition_of(t - 1, config_.z_space[static_cast<std::size_t>(j)],
                                           prev_cf, a_prev) +
                             resid)
                                .transpose();
                }
            }
        }
        for (int t = 0; t <= t_max; ++t)
            out.states_tilde.row(i).segment(static_cast<Eigen::Index>(t) * width, width) =
                blocks.row(t);

        for (int t = 0; t < t_max; ++t) {
            const int a_t = batch.actions(i, t);
            const double resid_r = batch.rewards(i, t) - reward_of(t, z, batch.state(i, t), a_t);
            double sum = 0.0;
            for (int j = 0; j < n_z; ++j) {
                if (j == own) {
                    sum += batch.rewards(i, t);
                } else {
                    const Eigen::VectorXd x_cf =
                        blocks.row(t).segment(static_cast<Eigen::Index>(j) * d_x_, d_x_)
                            .transpose();
                    sum += reward_of(t, config_.z_space[static_cast<std::size_t>(j)], x_cf, a_t) +
                           resid_r;
                }
            }
            out.rewards_tilde(i, t) = sum / static_cast<double>(n_z);
        }
    }
    return out;
}

Eigen::VectorXd SequentialPreprocessor::preprocess_step(
    const Eigen::VectorXd& z, int t, const Eigen::VectorXd& x_t,
    const std::optional<Eigen::VectorXd>& prev_counterfactuals, std::optional<int> a_prev) const {
    if (!fitted_) throw StateError("preprocess_step: preprocessor has not been fitted");
    if (static_cast<int>(x_t.size()) != d_x_)
        throw ShapeError("preprocess_step: state width mismatch");
    const int own = own_index(z);
    const int n_z = static_cast<int>(config_.z_space.size());
    const int width = augmented_dim();

    if (t == 0) {
        if (prev_counterfactuals.has_value() || a_prev.has_value())
            throw ValueError("preprocess_step: t=0 takes no previous counterfactuals or action");
        Eigen::VectorXd row(width);
        const Eigen::VectorXd own_pred = predict_initial(z);
        for (int j = 0; j < n_z; ++j) {
            if (j == own)
                row.segment(static_cast<Eigen::Index>(j) * d_x_, d_x_) = x_t;
            else
                row.segment(static_cast<Eigen::Index>(j) * d_x_, d_x_) =
                    predict_initial(config_.z_space[static_cast<std::size_t>(j)]) +
                    (x_t - own_pred);
        }
        return row;
    }

    if (!prev_counterfactuals.has_value() || !a_prev.has_value())
        throw ValueError("preprocess_step: t>0 requires previous counterfactuals and action");
    if (prev_counterfactuals->size() != width)
        throw ShapeError("preprocess_step: previous counterfactual width mismatch");
    if (*a_prev < 0 || *a_prev >= config_.num_actions)
        throw ValueError("preprocess_step: previous action outside [0, num_actions)");
    if (!exact_models_ && t > horizon_)
        throw DomainError("preprocess_step: preprocessor was trained for T=" +
                          std::to_string(horizon_) + ", cannot preprocess t=" + std::to_string(t));

    // The own-z block of the previous augmented state is the observed x_{t-1}.
    const Eigen::VectorXd prev_own =
        prev_counterfactuals->segment(static_cast<Eigen::Index>(own) * d_x_, d_x_);
    const Eigen::VectorXd resid = x_t - predict_transition(t - 1, z, prev_own, *a_prev);

    Eigen::VectorXd row(width);
    for (int j = 0; j < n_z; ++j) {
        if (j == own) {
            row.segment(static_cast<Eigen::Index>(j) * d_x_, d_x_) = x_t;
        } else {
            const Eigen::VectorXd prev_cf =
                prev_counterfactuals->segment(static_cast<Eigen::Index>(j) * d_x_, d_x_);
            row.segment(static_cast<Eigen::Index>(j) * d_x_, d_x_) =
                predict_transition(t - 1, config_.z_space[static_cast<std::size_t>(j)], prev_cf,
                                   *a_prev) +
                resid;
        }
    }
    return row;
}

Eigen::MatrixXd SequentialPreprocessor::preprocess_trajectory(
    const Eigen::VectorXd& z, const Eigen::MatrixXd& states,
    const std::vector<int>& actions) const {
    const int rows = static_cast<int>(states.rows());
    if (rows < 1) throw ShapeError("preprocess_trajectory: need at least one state row");
    if (static_cast<int>(actions.size()) < rows - 1)
        throw ShapeError("preprocess_trajectory: need one action per transition");
    Eigen::MatrixXd out(rows, augmented_dim());
    std::optional<Eigen::VectorXd> prev;
    for (int t = 0; t < rows; ++t) {
        std::optional<int> a_prev;
        if (t > 0) a_prev = actions[static_cast<std::size_t>(t - 1)];
        Eigen::VectorXd row = preprocess_step(z, t, states.row(t).transpose(), prev, a_prev);
        out.row(t) = row.transpose();
        prev = std::move(row);
    }
    return out;
}

SequentialPreprocessor::TrainOutput SequentialPreprocessor::preprocess_batch(
    const TrajectoryBatch& batch) const {
    if (!fitted_) throw StateError("preprocess_batch: preprocessor has not been fitted");
    batch.validate();
    if (batch.state_dim != d_x_) throw ShapeError("preprocess_batch: state width mismatch");
    const int n = batch.num_individuals();
    const int t_max = batch.horizon;
    const int width = augmented_dim();

    TrainOutput out;
    out.states_tilde.resize(n, static_cast<Eigen::Index>(t_max + 1) * width);
    out.rewards_tilde.resize(n, t_max);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        const int own = own_index(z);
        Eigen::MatrixXd blocks = preprocess_trajectory(z, batch.state_history(i, t_max),
                                                       batch.action_history(i, t_max));
        for (int t = 0; t <= t_max; ++t)
            out.states_tilde.row(i).segment(static_cast<Eigen::Index>(t) * width, width) =
                blocks.row(t);
        for (int t = 0; t < t_max; ++t) {
            const int a_t = batch.actions(i, t);
            const double resid_r =
                batch.rewards(i, t) - predict_reward(t, z, batch.state(i, t), a_t);
            double sum = 0.0;
            for (int j = 0; j < static_cast<int>(config_.z_space.size()); ++j) {
                if (j == own) {
                    sum += batch.rewards(i, t);
                } else {
                    const Eigen::VectorXd x_cf =
                        blocks.row(t).segment(static_cast<Eigen::Index>(j) * d_x_, d_x_)
                            .transpose();
                    sum += predict_reward(t, config_.z_space[static_cast<std::size_t>(j)], x_cf,
                                          a_t) +
                           resid_r;
                }
            }
            out.rewards_tilde(i, t) = sum / static_cast<double>(config_.z_space.size());
        }
    }
    return out;
}

SequentialPreprocessor SequentialPreprocessor::with_exact_models(
    PreprocessorConfig config, int d_x,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> initial_mean,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, int)>
        transition_mean,
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, int)> reward_mean) {
    SequentialPreprocessor sp(std::move(config));
    sp.exact_models_ = true;
    sp.d_x_ = d_x;
    sp.horizon_ = 0;  // exact models are time-homogeneous; any t is valid

    ModelSlot init;
    init.fn_initial = std::move(initial_mean);
    sp.initial_models_.push_back(std::move(init));

    ModelSlot trans;
    trans.fn_dynamics = std::move(transition_mean);
    sp.transition_models_.push_back({});
    sp.transition_models_.front().push_back(std::move(trans));

    ModelSlot rew;
    rew.fn_dynamics = [fn = std::move(reward_mean)](const Eigen::VectorXd& z,
                                                    const Eigen::VectorXd& x, int a) {
        Eigen::VectorXd out(1);
        out[0] = fn(z, x, a);
        return out;
    };
    sp.reward_models_.push_back({});
    sp.reward_models_.front().push_back(std::move(rew));

    sp.fitted_ = true;
    return sp;
}

void save_preprocessor(const SequentialPreprocessor& preprocessor, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << preprocessor.to_json().dump(2) << '\n';
}

SequentialPreprocessor load_preprocessor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return SequentialPreprocessor::from_json(json::parse(in));
}

json SequentialPreprocessor::to_json() const {
    if (!fitted_) throw StateError("to_json: preprocessor has not been fitted");
    if (exact_models_)
        throw StateError("to_json: exact-model preprocessor is not serializable");
    json j;
    j["format"] = "cfrl.preprocessor";
    j["version"] = 1;
    json z_space = json::array();
    for (const auto& z : config_.z_space)
        z_space.push_back(std::vector<double>(z.data(), z.data() + z.size()));
    j["z_space"] = std::move(z_space);
    j["num_actions"] = config_.num_actions;
    j["cross_folds"] = config_.cross_folds;
    j["mode"] = config_.mode;
    j["seed"] = config_.seed;
    j["state_dim"] = d_x_;
    j["z_dim"] = d_z_;
    j["horizon"] = horizon_;

    auto dump_slots = [](const std::vector<ModelSlot>& slots) {
        json arr = json::array();
        for (const auto& slot : slots) arr.push_back(slot.reg.to_json());
        return arr;
    };
    j["initial_models"] = dump_slots(initial_models_);
    json trans = json::array(), rew = json::array();
    for (const auto& slots : transition_models_) trans.push_back(dump_slots(slots));
    for (const auto& slots : reward_models_) rew.push_back(dump_slots(slots));
    j["transition_models"] = std::move(trans);
    j["reward_models"] = std::move(rew);
    return j;
}

SequentialPreprocessor SequentialPreprocessor::from_json(const json& blob) {
    if (blob.value("format", "") != "cfrl.preprocessor")
        throw SchemaError("preprocessor blob: missing or wrong format tag");
    if (blob.value("version", 0) != 1)
        throw SchemaError("preprocessor blob: unsupported version");
    PreprocessorConfig config;
    for (const auto& zj : blob.at("z_space")) {
        std::vector<double> vals = zj.get<std::vector<double>>();
        config.z_space.push_back(
            Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    config.num_actions = blob.at("num_actions").get<int>();
    config.cross_folds = blob.at("cross_folds").get<int>();
    config.mode = blob.at("mode").get<std::string>();
    config.seed = blob.at("seed").get<std::uint64_t>();

    SequentialPreprocessor sp(std::move(config));
    sp.d_x_ = blob.at("state_dim").get<int>();
    sp.d_z_ = blob.at("z_dim").get<int>();
    sp.horizon_ = blob.at("horizon").get<int>();
    auto load_slots = [](const json& arr) {
        std::vector<ModelSlot> slots;
        for (const auto& rj : arr) {
            ModelSlot slot;
            slot.reg = Regressor::from_json(rj);
            slots.push_back(std::move(slot));
        }
        return slots;
    };
    sp.initial_models_ = load_slots(blob.at("initial_models"));
    for (const auto& arr : blob.at("transition_models"))
        sp.transition_models_.push_back(load_slots(arr));
    for (const auto& arr : blob.at("reward_models")) sp.reward_models_.push_back(load_slots(arr));
    sp.fitted_ = true;
    return sp;
}

}  // namespace cfrl
