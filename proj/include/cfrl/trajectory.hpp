#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cfrl {

/// Offline trajectory data for N individuals over a shared horizon of T
/// transitions. States carry T+1 time points (a transition needs its
/// successor), actions and rewards carry T. The sensitive attribute z is
/// time-invariant. Instances are treated as immutable once built.
struct TrajectoryBatch {
    Eigen::MatrixXd zs;       // N x d_z
    Eigen::MatrixXd states;   // N x (T+1)*d_x, time-blocked columns
    Eigen::MatrixXi actions;  // N x T, values in [0, num_actions)
    Eigen::MatrixXd rewards;  // N x T
    std::vector<std::string> ids;

    int horizon = 0;    // T
    int state_dim = 0;  // d_x

    // Column labels used when exporting; defaulted for synthesized batches.
    std::vector<std::string> z_labels;
    std::vector<std::string> state_labels;
    std::string action_label = "action";
    std::string reward_label = "reward";
    std::string id_label = "id";

    int num_individuals() const { return static_cast<int>(zs.rows()); }
    int z_dim() const { return static_cast<int>(zs.cols()); }

    /// State of individual i at time t (length d_x).
    Eigen::VectorXd state(int i, int t) const {
        return states.row(i).segment(static_cast<Eigen::Index>(t) * state_dim, state_dim).transpose();
    }

    /// All individuals' states at time t (N x d_x).
    Eigen::MatrixXd states_at(int t) const {
        return states.middleCols(static_cast<Eigen::Index>(t) * state_dim, state_dim);
    }

    /// Rows x_0..x_t for individual i ((t+1) x d_x).
    Eigen::MatrixXd state_history(int i, int t) const;

    /// Actions a_0..a_{t-1} for individual i.
    std::vector<int> action_history(int i, int t) const;

    /// Throws if any structural invariant is violated (shape mismatch,
    /// non-finite values, negative actions).
    void validate() const;
};

/// Reads a long-format CSV (one row per individual and time point, T+1 rows
/// per individual, terminal row with empty action/reward) into a batch.
/// Individual order follows first appearance; time order follows the `time`
/// column, which must run 0..T.
TrajectoryBatch read_trajectory_from_csv(const std::string& path,
                                         const std::vector<std::string>& z_labels,
                                         const std::vector<std::string>& state_labels,
                                         const std::string& action_label,
                                         const std::string& reward_label,
                                         const std::string& id_label,
                                         int horizon);

/// Writes the batch as a long-format CSV readable by read_trajectory_from_csv.
/// Column order: id, time, z labels, state labels, action, reward. Reals are
/// serialized with 17 significant digits so a read-back is exact.
void write_trajectory_to_csv(const TrajectoryBatch& batch, const std::string& path);

/// Splits along the individual axis only. Test size is round(N * test_fraction)
/// clamped to [1, N-1]; both sides preserve the input's relative order.
std::pair<TrajectoryBatch, TrajectoryBatch> train_test_split(const TrajectoryBatch& batch,
                                                             double test_fraction,
                                                             std::uint64_t seed);

/// New batch holding the given individuals, in the given order.
TrajectoryBatch select_individuals(const TrajectoryBatch& batch, const std::vector<int>& rows);

/// Copy of `batch` with states (and optionally rewards) replaced; used to feed
/// preprocessed arrays through the same machinery as raw ones.
TrajectoryBatch with_replaced_states(const TrajectoryBatch& batch,
                                     const Eigen::MatrixXd& states,
                                     int state_dim,
                                     const Eigen::MatrixXd* rewards = nullptr);

}  // namespace cfrl
