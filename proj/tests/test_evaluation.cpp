#include <gtest/gtest.h>

#include <cmath>

#include "cfrl/agents.hpp"
#include "cfrl/environment.hpp"
#include "cfrl/errors.hpp"
#include "cfrl/evaluation.hpp"
#include "oracles/value_iteration.hpp"

using namespace cfrl;

namespace {

TrajectoryBatch demo_batch(int n, int horizon, std::uint64_t seed) {
    SyntheticEnvironment env = default_demo_env();
    Rng rng(seed);
    Eigen::MatrixXd zs(n, 1);
    for (int i = 0; i < n; ++i) zs(i, 0) = static_cast<double>(rng.uniform_index(2));
    RandomPolicy behavior(2);
    return sample_trajectories(env, zs, behavior, horizon, derive_seed(seed, 1));
}

FQEConfig linear_fqe(double discount = 0.9) {
    FQEConfig config;
    config.discount = discount;
    config.tolerance = 1e-5;
    config.max_iter = 300;
    return config;
}

Eigen::MatrixXd half_zs(int n) {
    Eigen::MatrixXd zs = Eigen::MatrixXd::Zero(n, 1);
    for (int i = n / 2; i < n; ++i) zs(i, 0) = 1.0;
    return zs;
}

}  // namespace

TEST(FQE, MyopicValueEqualsInitialRewardRegression) {
    TrajectoryBatch batch = demo_batch(40, 4, 3);
    RandomPolicy policy(2);
    ValueReport report = evaluate_value_through_fqe(batch, policy, linear_fqe(0.0));
    EXPECT_TRUE(report.converged);

    // Direct regression of r on (x, z) per action, policy-weighted at t=0.
    double expected = 0.0;
    for (int a = 0; a < 2; ++a) {
        std::vector<std::pair<int, int>> rows;
        for (int i = 0; i < batch.num_individuals(); ++i)
            for (int t = 0; t < batch.horizon; ++t)
                if (batch.actions(i, t) == a) rows.emplace_back(i, t);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 2);
        Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), 1);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            x(static_cast<Eigen::Index>(k), 0) = batch.states(rows[k].first, rows[k].second);
            x(static_cast<Eigen::Index>(k), 1) = batch.zs(rows[k].first, 0);
            y(static_cast<Eigen::Index>(k), 0) = batch.rewards(rows[k].first, rows[k].second);
        }
        RegressorSpec spec;
        spec.seed = derive_seed(0, 7000 + static_cast<std::uint64_t>(a));
        auto [model, fit_report] = fit(spec, x, y);
        for (int i = 0; i < batch.num_individuals(); ++i) {
            Eigen::MatrixXd phi(1, 2);
            phi << batch.states(i, 0), batch.zs(i, 0);
            expected += 0.5 * model.predict(phi)(0, 0);
        }
    }
    expected /= batch.num_individuals();
    EXPECT_NEAR(report.value, expected, 1e-9);
}

TEST(FQE, MatchesValueIterationOnTabularFixture) {
    oracle::TabularMdp mdp = oracle::two_state_fixture();
    TrajectoryBatch batch = oracle::rollout_fixture(mdp, 60, 40, 7);
    Eigen::MatrixXd q_star = oracle::value_iteration(mdp, 0.9);

    // Evaluate the value-iteration-optimal policy.
    FunctionPolicy optimal(
        [q_star](const Eigen::VectorXd&, const Eigen::VectorXd& x, int) {
            const int s = x[0] > 0.5 ? 0 : 1;
            Eigen::VectorXd probs = Eigen::VectorXd::Zero(2);
            probs[q_star(s, 0) >= q_star(s, 1) ? 0 : 1] = 1.0;
            return probs;
        },
        2);

    FQEConfig config = linear_fqe(0.9);
    config.finite_horizon = false;
    ValueReport report = evaluate_value_through_fqe(batch, optimal, config);
    EXPECT_TRUE(report.converged);

    double expected = 0.0;
    for (int i = 0; i < batch.num_individuals(); ++i) {
        const int s0 = batch.states(i, 0) > 0.5 ? 0 : 1;
        expected += q_star.row(s0).maxCoeff();
    }
    expected /= batch.num_individuals();
    EXPECT_NEAR(report.value, expected, 1e-3);
}

TEST(FQE, AgreesWithModelMonteCarloOnTabularFixture) {
    oracle::TabularMdp mdp = oracle::two_state_fixture();
    TrajectoryBatch batch = oracle::rollout_fixture(mdp, 80, 40, 11);
    Eigen::MatrixXd q_star = oracle::value_iteration(mdp, 0.9);
    SyntheticEnvironment env = oracle::tabular_env(mdp);

    FunctionPolicy optimal(
        [q_star](const Eigen::VectorXd&, const Eigen::VectorXd& x, int) {
            const int s = x[0] > 0.5 ? 0 : 1;
            Eigen::VectorXd probs = Eigen::VectorXd::Zero(2);
            probs[q_star(s, 0) >= q_star(s, 1) ? 0 : 1] = 1.0;
            return probs;
        },
        2);

    FQEConfig config = linear_fqe(0.9);
    config.finite_horizon = false;
    ValueReport fqe = evaluate_value_through_fqe(batch, optimal, config);

    // Long rollouts approximate the infinite-horizon value; initial states in
    // the fixture batch and the environment are both uniform over states.
    ValueReport mc = evaluate_value_through_model(env, batch.zs, optimal, 150, 0.9, 20, 13);
    EXPECT_EQ(mc.method, ValueMethod::model_mc);
    EXPECT_NEAR(fqe.value, mc.value, 3.0 * mc.std_error + 2e-3);
}

TEST(FQE, ErrorShrinksWithSampleSize) {
    oracle::TabularMdp mdp = oracle::two_state_fixture();
    Eigen::MatrixXd q_star = oracle::value_iteration(mdp, 0.9);
    FunctionPolicy optimal(
        [q_star](const Eigen::VectorXd&, const Eigen::VectorXd& x, int) {
            const int s = x[0] > 0.5 ? 0 : 1;
            Eigen::VectorXd probs = Eigen::VectorXd::Zero(2);
            probs[q_star(s, 0) >= q_star(s, 1) ? 0 : 1] = 1.0;
            return probs;
        },
        2);

    FQEConfig config = linear_fqe(0.9);
    config.finite_horizon = false;

    auto error_at = [&](int n) {
        TrajectoryBatch batch = oracle::rollout_fixture(mdp, n, 10, 17);
        ValueReport report = evaluate_value_through_fqe(batch, optimal, config);
        double expected = 0.0;
        for (int i = 0; i < batch.num_individuals(); ++i) {
            const int s0 = batch.states(i, 0) > 0.5 ? 0 : 1;
            expected += q_star.row(s0).maxCoeff();
        }
        expected /= batch.num_individuals();
        return std::abs(report.value - expected);
    };

    const double e100 = error_at(100);
    const double e400 = error_at(400);
    const double e1600 = error_at(1600);
    EXPECT_LE(e400, e100 + 0.02);
    EXPECT_LE(e1600, e400 + 0.02);
}

TEST(ModelValue, ZeroRewardEnvironmentHasValueZero) {
    std::vector<Eigen::VectorXd> z_space{Eigen::VectorXd::Zero(1)};
    SyntheticEnvironment env(
        1, 1, 2, z_space,
        [](const Eigen::VectorXd&, const Eigen::VectorXd& noise) { return noise; },
        [](const Eigen::VectorXd&, const Eigen::VectorXd& x, int, const Eigen::VectorXd& noise) {
            return (x + noise).eval();
        },
        [](const Eigen::VectorXd&, const Eigen::VectorXd&, int, double) { return 0.0; },
        NoiseSpec{NoiseSpec::Family::normal, 1.0, 0.0});
    RandomPolicy policy(2);
    ValueReport report =
        evaluate_value_through_model(env, Eigen::MatrixXd::Zero(10, 1), policy, 5, 0.9, 4, 19);
    EXPECT_EQ(report.value, 0.0);
    EXPECT_EQ(report.std_error, 0.0);
}

TEST(ModelValue, NoiseFreeDemoEnvMatchesClosedForm) {
    DemoEnvParams p;
    p.noise_sd = 0.0;
    SyntheticEnvironment env = default_demo_env(p);
    FixedActionPolicy always_one(1, 2);

    const int horizon = 10;
    const double discount = 0.9;
    // closed form for z = 0: x_0 = -0.5, x_{t+1} = 0.5 x_t + 0.6,
    // r_t = x_t + 0.5
    double x = -0.5, expected = 0.0, gain = 1.0;
    for (int t = 0; t < horizon; ++t) {
        expected += gain * (x + 0.5);
        x = 0.5 * x + 0.6;
        gain *= discount;
    }
    ValueReport report = evaluate_value_through_model(env, Eigen::MatrixXd::Zero(5, 1), always_one,
                                                      horizon, discount, 3, 23);
    EXPECT_NEAR(report.value, expected, 1e-9);
}

TEST(ModelValue, DeterministicGivenSeed) {
    SyntheticEnvironment env = default_demo_env();
    RandomPolicy policy(2);
    Eigen::MatrixXd zs = Eigen::MatrixXd::Ones(12, 1);
    ValueReport a = evaluate_value_through_model(env, zs, policy, 8, 0.9, 5, 101);
    ValueReport b = evaluate_value_through_model(env, zs, policy, 8, 0.9, 5, 101);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Fairness, ConstantPolicyIsPerfectlyFair) {
    SyntheticEnvironment env = default_demo_env();
    TrajectoryBatch batch = demo_batch(25, 5, 29);
    FixedActionPolicy constant(1, 2);
    CFMetricReport report = evaluate_fairness_through_model(env, batch, constant, 31, 5);
    EXPECT_EQ(report.cf_metric, 0.0);
    EXPECT_EQ(report.per_time.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(report.num_arms, 2);
    EXPECT_EQ(report.num_individuals, 25);
}

TEST(Fairness, SharedRandomizationMakesRandomPolicyFair) {
    SyntheticEnvironment env = default_demo_env();
    TrajectoryBatch batch = demo_batch(30, 6, 37);
    RandomPolicy random(2);
    CFMetricReport report = evaluate_fairness_through_model(env, batch, random, 41, 5);
    EXPECT_EQ(report.cf_metric, 0.0);
}

TEST(Fairness, SignFlippingEnvironmentIsMaximallyUnfair) {
    // z = 0 keeps the state at +1, z = 1 at -1; the policy thresholds at 0.
    std::vector<Eigen::VectorXd> z_space{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
    SyntheticEnvironment env(
        1, 1, 2, z_space,
        [](const Eigen::VectorXd& z, const Eigen::VectorXd&) {
            Eigen::VectorXd x(1);
            x[0] = 1.0 - 2.0 * z[0];
            return x;
        },
        [](const Eigen::VectorXd& z, const Eigen::VectorXd&, int, const Eigen::VectorXd&) {
            Eigen::VectorXd x(1);
            x[0] = 1.0 - 2.0 * z[0];
            return x;
        },
        [](const Eigen::VectorXd&, const Eigen::VectorXd& x, int, double) { return x[0]; },
        NoiseSpec{});
    FunctionPolicy threshold(
        [](const Eigen::VectorXd&, const Eigen::VectorXd& x, int) {
            Eigen::VectorXd probs = Eigen::VectorXd::Zero(2);
            probs[x[0] > 0.0 ? 1 : 0] = 1.0;
            return probs;
        },
        2);

    TrajectoryBatch batch = sample_trajectories(env, half_zs(20), threshold, 5, 43);
    CFMetricReport report = evaluate_fairness_through_model(env, batch, threshold, 47, 3);
    EXPECT_EQ(report.cf_metric, 1.0);
}

TEST(Fairness, MetricInvariantToZSpaceRelabeling) {
    DemoEnvParams p;
    SyntheticEnvironment env01 = default_demo_env(p);
    TrajectoryBatch batch = demo_batch(20, 4, 53);
    // threshold policy that actually reacts to the state
    FunctionPolicy threshold(
        [](const Eigen::VectorXd&, const Eigen::VectorXd& x, int) {
            Eigen::VectorXd probs = Eigen::VectorXd::Zero(2);
            probs[x[0] > 0.3 ? 1 : 0] = 1.0;
            return probs;
        },
        2);
    CFMetricReport a = evaluate_fairness_through_model(env01, batch, threshold, 59, 4);

    std::vector<Eigen::VectorXd> swapped{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};
    SyntheticEnvironment env10(
        1, 1, 2, swapped,
        [p](const Eigen::VectorXd& z, const Eigen::VectorXd& noise) {
            Eigen::VectorXd x(1);
            x[0] = p.x0_base + p.x0_z * z[0] + noise[0];
            return x;
        },
        [p](const Eigen::VectorXd& z, const Eigen::VectorXd& x, int a, const Eigen::VectorXd& noise) {
            Eigen::VectorXd next(1);
            next[0] = p.ar * x[0] + (a == 1 ? p.act1_base + p.act1_z * z[0] : p.act0) + noise[0];
            return next;
        },
        [p](const Eigen::VectorXd& z, const Eigen::VectorXd& x, int a, double) {
            return p.r_state * x[0] + p.r_action * a + p.r_z * z[0];
        },
        NoiseSpec{NoiseSpec::Family::normal, p.noise_sd, 0.0});
    CFMetricReport b = evaluate_fairness_through_model(env10, batch, threshold, 59, 4);
    EXPECT_EQ(a.cf_metric, b.cf_metric);
}

TEST(Fairness, MetricIsMeanOfPerTimeEntries) {
    SyntheticEnvironment env = default_demo_env();
    TrajectoryBatch batch = demo_batch(15, 5, 61);
    FunctionPolicy threshold(
        [](const Eigen::VectorXd&, const Eigen::VectorXd& x, int) {
            Eigen::VectorXd probs = Eigen::VectorXd::Zero(2);
            probs[x[0] > 0.2 ? 1 : 0] = 1.0;
            return probs;
        },
        2);
    CFMetricReport report = evaluate_fairness_through_model(env, batch, threshold, 67, 6);
    EXPECT_NEAR(report.cf_metric, report.per_time.mean(), 1e-15);
    EXPECT_GE(report.per_time.minCoeff(), 0.0);
    EXPECT_LE(report.per_time.maxCoeff(), 1.0);
}

TEST(Fairness, UnknownZIsRejected) {
    SyntheticEnvironment env = default_demo_env();
    TrajectoryBatch batch = demo_batch(10, 3, 71);
    batch.zs(4, 0) = 2.0;
    RandomPolicy policy(2);
    EXPECT_THROW(evaluate_fairness_through_model(env, batch, policy, 73, 2), DomainError);
}

TEST(Compare, TableLayoutAndOrder) {
    SyntheticEnvironment env = default_demo_env();
    TrajectoryBatch batch = demo_batch(20, 4, 79);

    std::vector<std::pair<std::string, std::shared_ptr<const Policy>>> policies;
    policies.emplace_back("Random", std::make_shared<RandomPolicy>(2));
    policies.emplace_back("Always1", std::make_shared<FixedActionPolicy>(1, 2));

    FQEConfig config = linear_fqe();
    config.max_iter = 50;
    ComparisonTable table = compare_baselines(env, batch, policies, config, 3, 83);
    ASSERT_EQ(table.entries.size(), 2u);
    EXPECT_EQ(table.entries[0].name, "Random");
    EXPECT_EQ(table.entries[1].name, "Always1");
    EXPECT_EQ(table.entries[0].cf_metric, 0.0);
    EXPECT_EQ(table.entries[1].cf_metric, 0.0);

    const std::string text = table.to_text();
    EXPECT_NE(text.find("Random"), std::string::npos);
    EXPECT_NE(text.find("Value"), std::string::npos);
    EXPECT_NE(text.find("Counterfactual Unfairness Level"), std::string::npos);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);

    const std::string csv = table.to_csv();
    EXPECT_NE(csv.find("policy,value,cf_metric"), std::string::npos);
}

TEST(Compare, SinglePolicyGivesSingleColumn) {
    SyntheticEnvironment env = default_demo_env();
    TrajectoryBatch batch = demo_batch(12, 3, 89);
    std::vector<std::pair<std::string, std::shared_ptr<const Policy>>> policies;
    policies.emplace_back("Random", std::make_shared<RandomPolicy>(2));
    ComparisonTable table = compare_baselines(env, batch, policies, linear_fqe(), 2, 97);
    EXPECT_EQ(table.entries.size(), 1u);
}
