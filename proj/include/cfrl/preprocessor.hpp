#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cfrl/regression.hpp"
#include "cfrl/trajectory.hpp"

namespace cfrl {

struct PreprocessorConfig {
    std::vector<Eigen::VectorXd> z_space;  // distinct sensitive-attribute values, each d_z
    int num_actions = 2;
    int cross_folds = 1;
    std::string mode = "single";
    RegressorSpec reg_spec;
    std::uint64_t seed = 0;  // fold partition and per-model seed derivation
};

/// Sequential counterfactual-state preprocessor.
///
/// Training fits, per cross-fitting fold, an initial-state model z -> x_0 and
/// per-time-step transition and reward models (z, x_{t-1}, a_{t-1}) -> x_t / r_{t-1},
/// then rebuilds each individual's trajectory under every value in z_space by
/// carrying the observed residuals forward:
///
///   x~_0(z') = m_0(z') + (x_0 - m_0(z))
///   x~_t(z') = m_t(z', x~_{t-1}(z'), a_{t-1}) + (x_t - m_t(z, x_{t-1}, a_{t-1}))
///
/// The augmented state at time t concatenates x~_t(z') over z_space order; the
/// block for the individual's own z is the observed state itself. Preprocessed
/// rewards average the counterfactual rewards over z_space.
///
/// With cross_folds = K >= 2, individuals are partitioned into K folds and each
/// fold is preprocessed by models trained on the other K-1 folds. K = 1 trains
/// and preprocesses on the same data. Deployment (preprocess_step) predicts
/// with the ensemble mean of the K fold models.
class SequentialPreprocessor {
public:
    explicit SequentialPreprocessor(PreprocessorConfig config);

    struct TrainOutput {
        Eigen::MatrixXd states_tilde;  // N x (T+1)*augmented_dim
        Eigen::MatrixXd rewards_tilde; // N x T
        std::vector<FitReport> fit_reports;
        bool any_nonconverged = false;
    };

    /// Fits all fold models on `batch` and returns its preprocessed arrays.
    /// Each individual is preprocessed by the models of the folds it was held
    /// out from.
    TrainOutput train_preprocessor(const TrajectoryBatch& batch);

    /// Preprocesses a batch with the already-fitted models (ensemble mean over
    /// folds), without refitting. fit_reports of the result is empty.
    TrainOutput preprocess_batch(const TrajectoryBatch& batch) const;

    /// One deployment-time step of the same recursion. At t = 0 both
    /// `prev_counterfactuals` and `a_prev` must be absent; afterwards
    /// `prev_counterfactuals` is the previous augmented state.
    Eigen::VectorXd preprocess_step(const Eigen::VectorXd& z, int t, const Eigen::VectorXd& x_t,
                                    const std::optional<Eigen::VectorXd>& prev_counterfactuals,
                                    std::optional<int> a_prev) const;

    /// Applies preprocess_step along a whole observed trajectory; returns
    /// (t_max+1) x augmented_dim rows where t_max = rows(states) - 1.
    Eigen::MatrixXd preprocess_trajectory(const Eigen::VectorXd& z, const Eigen::MatrixXd& states,
                                          const std::vector<int>& actions) const;

    bool fitted() const { return fitted_; }
    int augmented_dim() const;
    int state_dim() const { return d_x_; }
    int horizon() const { return horizon_; }
    const PreprocessorConfig& config() const { return config_; }
    const std::vector<int>& fold_assignment() const { return fold_of_; }

    /// Index of z in z_space (exact match); DomainError if absent.
    int own_index(const Eigen::VectorXd& z) const;

    /// Serialization. Only regression-backed preprocessors can be saved;
    /// exact-model injected ones throw StateError.
    nlohmann::json to_json() const;
    static SequentialPreprocessor from_json(const nlohmann::json& blob);

    /// Builds a preprocessor whose models are the given exact conditional
    /// means instead of fitted regressors (used to study behavior when the
    /// true dynamics are known). The result acts as fitted with K = 1 and
    /// supports steps for any t >= 0.
    static SequentialPreprocessor with_exact_models(
        PreprocessorConfig config, int d_x,
        std::function<Eigen::VectorXd(const Eigen::VectorXd& z)> initial_mean,
        std::function<Eigen::VectorXd(const Eigen::VectorXd& z, const Eigen::VectorXd& x, int a)>
            transition_mean,
        std::function<double(const Eigen::VectorXd& z, const Eigen::VectorXd& x, int a)>
            reward_mean);

private:
    struct ModelSlot {
        Regressor reg;
        // Exact-model alternatives; at most one is set, otherwise reg is used.
        std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn_initial;
        std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, int)>
            fn_dynamics;
    };

    // Ensemble-mean prediction across folds.
    Eigen::VectorXd predict_initial(const Eigen::VectorXd& z) const;
    Eigen::VectorXd predict_transition(int t, const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                       int action) const;
    double predict_reward(int t, const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                          int action) const;

    PreprocessorConfig config_;
    bool fitted_ = false;
    bool exact_models_ = false;
    int d_x_ = 0;
    int d_z_ = 0;
    int horizon_ = 0;
    std::vector<ModelSlot> initial_models_;               // K
    std::vector<std::vector<ModelSlot>> transition_models_;  // T x K, index s: (z,x_s,a_s)->x_{s+1}
    std::vector<std::vector<ModelSlot>> reward_models_;      // T x K, index s: (z,x_s,a_s)->r_s
    std::vector<int> fold_of_;                             // training bookkeeping
};

void save_preprocessor(const SequentialPreprocessor& preprocessor, const std::string& path);
SequentialPreprocessor load_preprocessor(const std::string& path);

/// Feature row [z, x, onehot(action)] shared by every model that conditions on
/// (z, state, action).
Eigen::VectorXd state_action_features(const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                                      int action, int num_actions);

}  // namespace cfrl
