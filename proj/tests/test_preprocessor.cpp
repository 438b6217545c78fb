#include <gtest/gtest.h>


#include <nlohmann/json.hpp>

#include "cfrl/environment.hpp"
#include "cfrl/errors.hpp"
#include "cfrl/preprocessor.hpp"
#include "cfrl/random.hpp"
#include "oracles/ridge_oracle.hpp"

using namespace cfrl;

namespace {

std::vector<Eigen::VectorXd> binary_z_space() {
    return {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
}

PreprocessorConfig linear_config(int folds = 1, std::uint64_t seed = 0) {
    PreprocessorConfig config;
    config.z_space = binary_z_space();
    config.num_actions = 2;
    config.cross_folds = folds;
    config.seed = seed;
    return config;
}

TrajectoryBatch demo_batch(int n, int horizon, std::uint64_t seed) {
    SyntheticEnvironment env = default_demo_env();
    Rng rng(seed);
    Eigen::MatrixXd zs(n, 1);
    for (int i = 0; i < n; ++i) zs(i, 0) = static_cast<double>(rng.uniform_index(2));
    RandomPolicy behavior(2);
    return sample_trajectories(env, zs, behavior, horizon, derive_seed(seed, 1));
}

}  // namespace

TEST(Preprocessor, SingleZValueCollapsesToIdentity) {
    PreprocessorConfig config;
    config.z_space = {Eigen::VectorXd::Zero(1)};
    config.num_actions = 2;
    SequentialPreprocessor sp(config);

    TrajectoryBatch batch = demo_batch(12, 3, 7);
    batch.zs.setZero();  // all individuals share the single z value
    auto out = sp.train_preprocessor(batch);
    EXPECT_EQ(out.states_tilde, batch.states);
    EXPECT_EQ(out.rewards_tilde, batch.rewards);
}

TEST(Preprocessor, OwnZBlockEqualsObservedStateExactly) {
    SequentialPreprocessor sp(linear_config(2, 3));
    TrajectoryBatch batch = demo_batch(20, 4, 11);
    auto out = sp.train_preprocessor(batch);

    const int width = sp.augmented_dim();
    ASSERT_EQ(width, 2);
    for (int i = 0; i < batch.num_individuals(); ++i) {
        const int own = sp.own_index(batch.zs.row(i).transpose());
        for (int t = 0; t <= batch.horizon; ++t) {
            EXPECT_EQ(out.states_tilde(i, t * width + own), batch.states(i, t))
                << "i=" << i << " t=" << t;
        }
    }
}

TEST(Preprocessor, AugmentedWidthIsZSpaceTimesStateDim) {
    SequentialPreprocessor sp(linear_config());
    TrajectoryBatch batch = demo_batch(10, 2, 13);
    auto out = sp.train_preprocessor(batch);
    EXPECT_EQ(sp.augmented_dim(), 2);
    EXPECT_EQ(out.states_tilde.cols(), (batch.horizon + 1) * 2);
    EXPECT_EQ(out.rewards_tilde.cols(), batch.horizon);
}

// N=2, T=1, K=1 with linear models: every model fit and the full recursion are
// reproduced from scratch with the independent ridge oracle.
TEST(Preprocessor, ClosedFormOracleN2T1) {
    TrajectoryBatch batch;
    batch.horizon = 1;
    batch.state_dim = 1;
    batch.zs.resize(2, 1);
    batch.zs << 0.0, 1.0;
    batch.states.resize(2, 2);
    batch.states << 0.3, 0.9, -0.4, 0.25;
    batch.actions.resize(2, 1);
    batch.actions << 1, 0;
    batch.rewards.resize(2, 1);
    batch.rewards << 0.7, -0.2;
    batch.ids = {"a", "b"};

    SequentialPreprocessor sp(linear_config(1, 5));
    auto out = sp.train_preprocessor(batch);

    // Oracle initial-state model: z -> x_0.
    oracle::RidgeFit m0 = oracle::ridge_fit(batch.zs, batch.states_at(0));
    // Oracle transition / reward models on [z, x_0, onehot(a_0)].
    Eigen::MatrixXd feats(2, 4);
    for (int i = 0; i < 2; ++i)
        feats.row(i) =
            state_action_features(batch.zs.row(i).transpose(), batch.state(i, 0),
                                  batch.actions(i, 0), 2)
                .transpose();
    oracle::RidgeFit m1 = oracle::ridge_fit(feats, batch.states_at(1));
    oracle::RidgeFit g1 = oracle::ridge_fit(feats, batch.rewards);

    const auto z_space = binary_z_space();
    for (int i = 0; i < 2; ++i) {
        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        const int a0 = batch.actions(i, 0);
        for (int j = 0; j < 2; ++j) {
            const Eigen::VectorXd zj = z_space[static_cast<std::size_t>(j)];
            // t = 0
            Eigen::VectorXd x0_cf =
                m0.predict_one(zj) + (batch.state(i, 0) - m0.predict_one(z));
            if (zj == z) x0_cf = batch.state(i, 0);
            EXPECT_NEAR(out.states_tilde(i, j), x0_cf[0], 1e-8) << "i=" << i << " j=" << j;
            // t = 1
            Eigen::VectorXd x1_cf =
                m1.predict_one(state_action_features(zj, x0_cf, a0, 2)) +
                (batch.state(i, 1) -
                 m1.predict_one(state_action_features(z, batch.state(i, 0), a0, 2)));
            if (zj == z) x1_cf = batch.state(i, 1);
            EXPECT_NEAR(out.states_tilde(i, 2 + j), x1_cf[0], 1e-8) << "i=" << i << " j=" << j;
        }
        // reward: mean over z_space of counterfactual rewards
        double expected_reward = 0.0;
        for (int j = 0; j < 2; ++j) {
            const Eigen::VectorXd zj = z_space[static_cast<std::size_t>(j)];
            if (zj == z) {
                expected_reward += batch.rewards(i, 0);
            } else {
                Eigen::VectorXd x0_cf =
                    m0.predict_one(zj) + (batch.state(i, 0) - m0.predict_one(z));
                expected_reward +=
                    g1.predict_one(state_action_features(zj, x0_cf, a0, 2))[0] +
                    (batch.rewards(i, 0) -
                     g1.predict_one(state_action_features(z, batch.state(i, 0), a0, 2))[0]);
            }
        }
        expected_reward /= 2.0;
        EXPECT_NEAR(out.rewards_tilde(i, 0), expected_reward, 1e-8) << "i=" << i;
    }
}

// Cross-fitting: with K=2 every individual must be preprocessed by models
// trained only on the other fold. Reproduced with oracle refits per fold.
TEST(Preprocessor, CrossFittingUsesHeldOutModels) {
    TrajectoryBatch batch = demo_batch(6, 1, 17);
    SequentialPreprocessor sp(linear_config(2, 23));
    auto out = sp.train_preprocessor(batch);
    const auto& fold_of = sp.fold_assignment();
    ASSERT_EQ(fold_of.size(), 6u);

    const auto z_space = binary_z_space();
    for (int i = 0; i < 6; ++i) {
        const int fold = fold_of[static_cast<std::size_t>(i)];
        std::vector<int> train_rows;
        for (int r = 0; r < 6; ++r)
            if (fold_of[static_cast<std::size_t>(r)] != fold) train_rows.push_back(r);
        ASSERT_FALSE(train_rows.empty());

        const int m = static_cast<int>(train_rows.size());
        Eigen::MatrixXd z_in(m, 1), x0(m, 1), feats(m, 4), x1(m, 1);
        for (int r = 0; r < m; ++r) {
            const int src = train_rows[static_cast<std::size_t>(r)];
            z_in.row(r) = batch.zs.row(src);
            x0.row(r) = batch.state(src, 0).transpose();
            feats.row(r) = state_action_features(batch.zs.row(src).transpose(),
                                                 batch.state(src, 0), batch.actions(src, 0), 2)
                               .transpose();
            x1.row(r) = batch.state(src, 1).transpose();
        }
        oracle::RidgeFit m0 = oracle::ridge_fit(z_in, x0);
        oracle::RidgeFit m1 = oracle::ridge_fit(feats, x1);

        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        for (int j = 0; j < 2; ++j) {
            const Eigen::VectorXd zj = z_space[static_cast<std::size_t>(j)];
            if (zj == z) continue;
            Eigen::VectorXd x0_cf = m0.predict_one(zj) + (batch.state(i, 0) - m0.predict_one(z));
            EXPECT_NEAR(out.states_tilde(i, j), x0_cf[0], 1e-8) << "i=" << i;
            Eigen::VectorXd x1_cf =
                m1.predict_one(state_action_features(zj, x0_cf, batch.actions(i, 0), 2)) +
                (batch.state(i, 1) -
                 m1.predict_one(
                     state_action_features(z, batch.state(i, 0), batch.actions(i, 0), 2)));
            EXPECT_NEAR(out.states_tilde(i, 2 + j), x1_cf[0], 1e-8) << "i=" << i;
        }
    }
}

TEST(Preprocessor, FoldSizesDifferByAtMostOne) {
    TrajectoryBatch batch = demo_batch(11, 1, 29);
    SequentialPreprocessor sp(linear_config(3, 31));
    sp.train_preprocessor(batch);
    std::vector<int> counts(3, 0);
    for (int f : sp.fold_assignment()) counts[static_cast<std::size_t>(f)]++;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1);
}

TEST(Preprocessor, StepwiseApplicationMatchesTrainingOutput) {
    TrajectoryBatch batch = demo_batch(15, 4, 37);
    SequentialPreprocessor sp(linear_config(1, 41));
    auto out = sp.train_preprocessor(batch);

    const int width = sp.augmented_dim();
    for (int i : {0, 7, 14}) {
        Eigen::MatrixXd rows = sp.preprocess_trajectory(
            batch.zs.row(i).transpose(), batch.state_history(i, batch.horizon),
            batch.action_history(i, batch.horizon));
        for (int t = 0; t <= batch.horizon; ++t)
            for (int j = 0; j < width; ++j)
                EXPECT_NEAR(rows(t, j), out.states_tilde(i, t * width + j), 1e-10);
    }
}

TEST(Preprocessor, SingleZStepReturnsStateUnchanged) {
    PreprocessorConfig config;
    config.z_space = {Eigen::VectorXd::Zero(1)};
    config.num_actions = 2;
    SequentialPreprocessor sp(config);
    TrajectoryBatch batch = demo_batch(8, 2, 43);
    batch.zs.setZero();
    sp.train_preprocessor(batch);

    Eigen::VectorXd x(1);
    x << 0.37;
    Eigen::VectorXd row =
        sp.preprocess_step(Eigen::VectorXd::Zero(1), 0, x, std::nullopt, std::nullopt);
    EXPECT_EQ(row, x);
}

TEST(Preprocessor, ZSpacePermutationPermutesBlocks) {
    TrajectoryBatch batch = demo_batch(14, 3, 47);

    SequentialPreprocessor sp01(linear_config(2, 53));
    auto out01 = sp01.train_preprocessor(batch);

    PreprocessorConfig swapped = linear_config(2, 53);
    std::swap(swapped.z_space[0], swapped.z_space[1]);
    SequentialPreprocessor sp10(swapped);
    auto out10 = sp10.train_preprocessor(batch);

    const int width = 2;
    for (int i = 0; i < batch.num_individuals(); ++i)
        for (int t = 0; t <= batch.horizon; ++t)
            for (int j = 0; j < 2; ++j)
                EXPECT_EQ(out01.states_tilde(i, t * width + j),
                          out10.states_tilde(i, t * width + (1 - j)));
    EXPECT_EQ(out01.rewards_tilde, out10.rewards_tilde);
}

// With the true additive dynamics injected, an individual and its shared-noise
// counterfactual twin produce the same augmented state at every step.
TEST(Preprocessor, ExactModelsMakeTwinsIndistinguishable) {
    const DemoEnvParams params;
    SyntheticEnvironment env = default_demo_env(params);

    SequentialPreprocessor sp = SequentialPreprocessor::with_exact_models(
        linear_config(), 1,
        [params](const Eigen::VectorXd& z) {
            Eigen::VectorXd x(1);
            x[0] = params.x0_base + params.x0_z * z[0];
            return x;
        },
        [params](const Eigen::VectorXd& z, const Eigen::VectorXd& x, int a) {
            Eigen::VectorXd next(1);
            next[0] = params.ar * x[0] + (a == 1 ? params.act1_base + params.act1_z * z[0] : params.act0);
            return next;
        },
        [params](const Eigen::VectorXd& z, const Eigen::VectorXd& x, int a) {
            return params.r_state * x[0] + params.r_action * a + params.r_z * z[0];
        });

    const int n = 25, horizon = 6;
    std::vector<Eigen::MatrixXd> zs_arms{Eigen::MatrixXd::Zero(n, 1), Eigen::MatrixXd::Ones(n, 1)};
    std::vector<Eigen::MatrixXd> x0_arms(2);
    Rng rng(59);
    x0_arms[0].resize(n, 1);
    x0_arms[1].resize(n, 1);
    for (int i = 0; i < n; ++i) {
        const double noise = rng.normal() * params.noise_sd;
        x0_arms[0](i, 0) = params.x0_base + noise;
        x0_arms[1](i, 0) = params.x0_base + params.x0_z + noise;
    }
    RandomPolicy behavior(2);
    auto arms = sample_counterfactual_arms(env, zs_arms, x0_arms, behavior, horizon, 61);

    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd aug0 = sp.preprocess_trajectory(
            Eigen::VectorXd::Zero(1), arms[0].state_history(i, horizon),
            arms[0].action_history(i, horizon));
        Eigen::MatrixXd aug1 = sp.preprocess_trajectory(
            Eigen::VectorXd::Ones(1), arms[1].state_history(i, horizon),
            arms[1].action_history(i, horizon));
        EXPECT_LT((aug0 - aug1).cwiseAbs().maxCoeff(), 1e-9) << "individual " << i;
    }
}

TEST(Preprocessor, ErrorsAndValidation) {
    EXPECT_THROW(
        [] {
            PreprocessorConfig config;
            config.z_space = binary_z_space();
            config.mode = "multi";
            return SequentialPreprocessor(config);
        }(),
        ConfigError);

    PreprocessorConfig dup;
    dup.z_space = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    EXPECT_THROW(SequentialPreprocessor{dup}, ConfigError);

    TrajectoryBatch batch = demo_batch(5, 2, 67);
    SequentialPreprocessor sp(linear_config(7));
    EXPECT_THROW(sp.train_preprocessor(batch), SizeError);  // folds > N

    batch.zs(2, 0) = 3.0;  // not in z_space
    SequentialPreprocessor sp2(linear_config(1));
    EXPECT_THROW(sp2.train_preprocessor(batch), DomainError);

    SequentialPreprocessor unfitted(linear_config(1));
    Eigen::VectorXd x(1);
    x << 0.0;
    EXPECT_THROW(
        unfitted.preprocess_step(Eigen::VectorXd::Zero(1), 0, x, std::nullopt, std::nullopt),
        StateError);
}

TEST(Preprocessor, SerializationRoundTrip) {
    TrajectoryBatch batch = demo_batch(12, 3, 71);
    SequentialPreprocessor sp(linear_config(2, 73));
    sp.train_preprocessor(batch);

    SequentialPreprocessor loaded = SequentialPreprocessor::from_json(sp.to_json());
    Eigen::MatrixXd history = batch.state_history(0, batch.horizon);
    std::vector<int> actions = batch.action_history(0, batch.horizon);
    EXPECT_EQ(loaded.preprocess_trajectory(batch.zs.row(0).transpose(), history, actions),
              sp.preprocess_trajectory(batch.zs.row(0).transpose(), history, actions));
}
