#pragma once

// Small deterministic MDP fixture plus a textbook value-iteration solver,
// used as the reference for FQI and FQE. Independent of the library's
// regression machinery.

#include <vector>

#include <Eigen/Core>

#include "cfrl/environment.hpp"
#include "cfrl/random.hpp"
#include "cfrl/trajectory.hpp"

namespace oracle {

struct TabularMdp {
    int num_states = 2;
    int num_actions = 2;
    std::vector<std::vector<int>> next;       // next[s][a]
    std::vector<std::vector<double>> reward;  // reward[s][a]
};

/// Two states, two actions, deterministic. At gamma = 0.9 the optimal action
/// differs by state (stay at s0 via a=0, stay at s1 via a=1), with Q* =
/// [[10, 9.45], [9, 10.5]].
inline TabularMdp two_state_fixture() {
    TabularMdp mdp;
    mdp.next = {{0, 1}, {0, 1}};
    mdp.reward = {{1.0, 0.0}, {0.0, 1.05}};
    return mdp;
}

/// Synchronous value iteration to the fixed point; returns Q (S x A).
inline Eigen::MatrixXd value_iteration(const TabularMdp& mdp, double discount,
                                       double tol = 1e-13, int max_sweeps = 100000) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_actions);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        Eigen::MatrixXd next_q(mdp.num_states, mdp.num_actions);
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a)
                next_q(s, a) = mdp.reward[s][a] + discount * q.row(mdp.next[s][a]).maxCoeff();
        const double change = (next_q - q).cwiseAbs().maxCoeff();
        q = next_q;
        if (change < tol) break;
    }
    return q;
}

/// Uniform-random-behavior trajectories through the MDP, states one-hot
/// encoded (d_x = num_states), z fixed at 0.
inline cfrl::TrajectoryBatch rollout_fixture(const TabularMdp& mdp, int n, int horizon,
                                             std::uint64_t seed) {
    cfrl::TrajectoryBatch batch;
    batch.horizon = horizon;
    batch.state_dim = mdp.num_states;
    batch.zs = Eigen::MatrixXd::Zero(n, 1);
    batch.states.resize(n, static_cast<Eigen::Index>(horizon + 1) * mdp.num_states);
    batch.actions.resize(n, horizon);
    batch.rewards.resize(n, horizon);
    for (int i = 0; i < n; ++i) batch.ids.push_back(std::to_string(i + 1));

    cfrl::Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        int s = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(mdp.num_states)));
        for (int t = 0; t <= horizon; ++t) {
            batch.states.row(i)
                .segment(static_cast<Eigen::Index>(t) * mdp.num_states, mdp.num_states)
                .setZero();
            batch.states(i, static_cast<Eigen::Index>(t) * mdp.num_states + s) = 1.0;
            if (t == horizon) break;
            int a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(mdp.num_actions)));
            batch.actions(i, t) = a;
            batch.rewards(i, t) = mdp.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
            s = mdp.next[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        }
    }
    return batch;
}

/// The fixture as an EnvironmentModel, for Monte-Carlo cross-checks. Initial
/// state is uniform over states via the noise draw; dynamics are exact.
inline cfrl::SyntheticEnvironment tabular_env(const TabularMdp& mdp) {
    std::vector<Eigen::VectorXd> z_space{Eigen::VectorXd::Zero(1)};
    const int ns = mdp.num_states;
    auto onehot = [ns](int s) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(ns);
        x[s] = 1.0;
        return x;
    };
    auto state_of = [ns](const Eigen::VectorXd& x) {
        int best = 0;
        for (int s = 1; s < ns; ++s)
            if (x[s] > x[best]) best = s;
        return best;
    };
    cfrl::SyntheticEnvironment::InitialFn initial =
        [mdp, onehot](const Eigen::VectorXd&, const Eigen::VectorXd& noise) {
            // noise entries are iid normal; use the first to pick a start state
            const double u = 0.5 * (1.0 + std::erf(noise[0] / std::sqrt(2.0)));
            int s = std::min(mdp.num_states - 1, static_cast<int>(u * mdp.num_states));
            return onehot(s);
        };
    cfrl::SyntheticEnvironment::TransitionFn transition =
        [mdp, onehot, state_of](const Eigen::VectorXd&, const Eigen::VectorXd& x, int a,
                                const Eigen::VectorXd&) {
            return onehot(mdp.next[static_cast<std::size_t>(state_of(x))][static_cast<std::size_t>(a)]);
        };
    cfrl::SyntheticEnvironment::RewardFn reward =
        [mdp, state_of](const Eigen::VectorXd&, const Eigen::VectorXd& x, int a, double) {
            return mdp.reward[static_cast<std::size_t>(state_of(x))][static_cast<std::size_t>(a)];
        };
    cfrl::NoiseSpec noise;
    noise.state_sd = 1.0;  // consumed by the initial-state picker only
    return cfrl::SyntheticEnvironment(mdp.num_states, 1, mdp.num_actions, std::move(z_space),
                                      std::move(initial), std::move(transition), std::move(reward),
                                      noise);
}

}  // namespace oracle
