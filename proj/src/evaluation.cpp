#include "cfrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

std::string to_string(ValueMethod method) {
    return method == ValueMethod::fqe ? "fqe" : "model_mc";
}

ValueReport evaluate_value_through_fqe(const TrajectoryBatch& batch, const Policy& policy,
                                       const FQEConfig& config) {
    batch.validate();
    if (config.max_iter < 1) throw ConfigError("evaluate_value_through_fqe: max_iter must be >= 1");
    if (!(config.discount >= 0.0 && config.discount < 1.0))
        throw ConfigError("evaluate_value_through_fqe: discount must lie in [0, 1)");
    const int num_actions = policy.num_actions();
    if ((batch.actions.array() >= num_actions).any())
        throw ValueError("evaluate_value_through_fqe: data contains actions the policy lacks");

    const int n = batch.num_individuals();
    const int t_max = batch.horizon;
    const int d_z = batch.z_dim();
    const int feat_dim = batch.state_dim + d_z;

    // Policy distributions along each observed trajectory, pi[i] is (T+1) x A.
    std::vector<Eigen::MatrixXd> pi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        const Eigen::MatrixXd history = batch.state_history(i, t_max);
        pi[static_cast<std::size_t>(i)].resize(t_max + 1, num_actions);
        for (int t = 0; t <= t_max; ++t) {
            pi[static_cast<std::size_t>(i)].row(t) =
                policy
                    .action_distribution(z, history.topRows(t + 1), batch.action_history(i, t), t)
                    .transpose();
        }
    }

    const Eigen::Index n_tuples = static_cast<Eigen::Index>(n) * t_max;
    Eigen::MatrixXd phi(n_tuples, feat_dim), phi_next(n_tuples, feat_dim);
    Eigen::MatrixXd pi_next(n_tuples, num_actions);
    Eigen::VectorXd reward_vec(n_tuples);
    std::vector<int> action_of(static_cast<std::size_t>(n_tuples));
    std::vector<bool> terminal(static_cast<std::size_t>(n_tuples));
    {
        Eigen::Index row = 0;
        for (int i = 0; i < n; ++i) {
            for (int t = 0; t < t_max; ++t, ++row) {
                phi.row(row) << batch.state(i, t).transpose(), batch.zs.row(i);
                phi_next.row(row) << batch.state(i, t + 1).transpose(), batch.zs.row(i);
                pi_next.row(row) = pi[static_cast<std::size_t>(i)].row(t + 1);
                reward_vec[row] = batch.rewards(i, t);
                action_of[static_cast<std::size_t>(row)] = batch.actions(i, t);
                terminal[static_cast<std::size_t>(row)] = (t == t_max - 1);
            }
        }
    }

    std::vector<std::vector<Eigen::Index>> strata(static_cast<std::size_t>(num_actions));
    for (Eigen::Index r = 0; r < n_tuples; ++r)
        strata[static_cast<std::size_t>(action_of[static_cast<std::size_t>(r)])].push_back(r);
    for (int a = 0; a < num_actions; ++a)
        if (strata[static_cast<std::size_t>(a)].empty())
            throw SizeError("evaluate_value_through_fqe: action " + std::to_string(a) +
                            " has no transitions in the data");

    ValueReport report;
    report.method = ValueMethod::fqe;

    Eigen::MatrixXd q_now = Eigen::MatrixXd::Zero(n_tuples, num_actions);
    Eigen::MatrixXd q_next = Eigen::MatrixXd::Zero(n_tuples, num_actions);
    std::vector<Regressor> models(static_cast<std::size_t>(num_actions));

    for (int iter = 0; iter < config.max_iter; ++iter) {
        Eigen::VectorXd targets(n_tuples);
        for (Eigen::Index r = 0; r < n_tuples; ++r) {
            double bootstrap = 0.0;
            if (!(config.finite_horizon && terminal[static_cast<std::size_t>(r)]) && iter > 0)
                bootstrap = pi_next.row(r).dot(q_next.row(r));
            targets[r] = reward_vec[r] + config.discount * bootstrap;
        }
        if (!targets.allFinite())
            throw ConvergenceError(
                "evaluate_value_through_fqe: non-finite targets at iteration " +
                std::to_string(iter + 1));

        double delta = 0.0;
        for (int a = 0; a < num_actions; ++a) {
            const auto& rows = strata[static_cast<std::size_t>(a)];
            Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), feat_dim);
            Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), 1);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                x.row(static_cast<Eigen::Index>(k)) = phi.row(rows[k]);
                y(static_cast<Eigen::Index>(k), 0) = targets[rows[k]];
            }
            RegressorSpec spec = config.reg_spec;
            spec.seed = derive_seed(config.reg_spec.seed, 7000 + static_cast<std::uint64_t>(a));
            auto [model, fit_report] = fit(spec, x, y);
            Eigen::VectorXd now = model.predict(phi).col(0);
            Eigen::VectorXd next = model.predict(phi_next).col(0);
            if (!now.allFinite() || !next.allFinite())
                throw ConvergenceError(
                    "evaluate_value_through_fqe: non-finite Q values at iteration " +
                    std::to_string(iter + 1));
            delta = std::max(delta, (now - q_now.col(a)).cwiseAbs().maxCoeff());
            q_now.col(a) = now;
            q_next.col(a) = next;
            models[static_cast<std::size_t>(a)] = std::move(model);
        }
        if (!std::isfinite(delta))
            throw ConvergenceError("evaluate_value_through_fqe: non-finite Q update at iteration " +
                                   std::to_string(iter + 1));
        report.residual_curve.push_back(delta);
        if (delta < config.tolerance) {
            report.converged = true;
            break;
        }
    }

    // Value: policy-weighted Q at each individual's initial state.
    double value = 0.0;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd phi0(feat_dim);
        phi0 << batch.state(i, 0), batch.zs.row(i).transpose();
        for (int a = 0; a < num_actions; ++a)
            value += pi[static_cast<std::size_t>(i)](0, a) *
                     models[static_cast<std::size_t>(a)].predict(phi0.transpose())(0, 0);
    }
    report.value = value / static_cast<double>(n);
    return report;
}

ValueReport evaluate_value_through_model(const EnvironmentModel& env, const Eigen::MatrixXd& zs,
                                         const Policy& policy, int horizon, double discount,
                                         int num_reps, std::uint64_t seed) {
    if (num_reps < 1) throw ConfigError("evaluate_value_through_model: num_reps must be >= 1");
    const int n = static_cast<int>(zs.rows());
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(num_reps));

    for (int rep = 0; rep < num_reps; ++rep) {
        TrajectoryBatch rollout = sample_trajectories(
            env, zs, policy, horizon, derive_seed(seed, static_cast<std::uint64_t>(rep)));
        for (int i = 0; i < n; ++i) {
            double ret = 0.0, gain = 1.0;
            for (int t = 0; t < horizon; ++t) {
                ret += gain * rollout.rewards(i, t);
                gain *= discount;
            }
            returns.push_back(ret);
        }
    }

    const double count = static_cast<double>(returns.size());
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= count;
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var = count > 1 ? var / (count - 1) : 0.0;

    ValueReport report;
    report.method = ValueMethod::model_mc;
    report.value = mean;
    report.std_error = std::sqrt(var / count);
    report.converged = true;
    return report;
}

CFMetricReport evaluate_fairness_through_model(const EnvironmentModel& env,
                                               const TrajectoryBatch& batch, const Policy& policy,
                                               std::uint64_t seed, int num_reps) {
    batch.validate();
    if (num_reps < 1) throw ConfigError("evaluate_fairness_through_model: num_reps must be >= 1");
    const std::vector<Eigen::VectorXd>& z_space = env.z_space();
    const int n_arms = static_cast<int>(z_space.size());
    const int n = batch.num_individuals();
    const int t_max = batch.horizon;

    // Own-arm index per individual; DomainError if an observed z is unknown.
    std::vector<int> own(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        for (int j = 0; j < n_arms; ++j)
            if (z_space[static_cast<std::size_t>(j)] == z) own[static_cast<std::size_t>(i)] = j;
        if (own[static_cast<std::size_t>(i)] < 0)
            throw DomainError(
                "evaluate_fairness_through_model: observed z is not in the environment's z_space");
    }

    // Arm construction: own arm starts at the observed x_0, the others at the
    // additive-residual counterfactual initial state.
    std::vector<Eigen::MatrixXd> zs_arms(static_cast<std::size_t>(n_arms));
    std::vector<Eigen::MatrixXd> x0_arms(static_cast<std::size_t>(n_arms));
    for (int j = 0; j < n_arms; ++j) {
        zs_arms[static_cast<std::size_t>(j)].resize(n, env.z_dim());
        x0_arms[static_cast<std::size_t>(j)].resize(n, env.state_dim());
    }
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd z = batch.zs.row(i).transpose();
        const Eigen::VectorXd x0 = batch.state(i, 0);
        const Eigen::VectorXd own_mean = env.initial_mean(z);
        for (int j = 0; j < n_arms; ++j) {
            const Eigen::VectorXd& z_j = z_space[static_cast<std::size_t>(j)];
            zs_arms[static_cast<std::size_t>(j)].row(i) = z_j.transpose();
            if (j == own[static_cast<std::size_t>(i)]) {
                x0_arms[static_cast<std::size_t>(j)].row(i) = x0.transpose();
            } else {
                x0_arms[static_cast<std::size_t>(j)].row(i) =
                    (env.initial_mean(z_j) + (x0 - own_mean)).transpose();
            }
        }
    }

    const double n_pairs = static_cast<double>(n_arms) * (n_arms - 1) / 2.0;
    Eigen::VectorXd per_time = Eigen::VectorXd::Zero(t_max);
    if (n_pairs > 0) {
        for (int rep = 0; rep < num_reps; ++rep) {
            std::vector<TrajectoryBatch> arms =
                sample_counterfactual_arms(env, zs_arms, x0_arms, policy, t_max,
                                           derive_seed(seed, static_cast<std::uint64_t>(rep)));
            for (int i = 0; i < n; ++i) {
                for (int t = 0; t < t_max; ++t) {
                    int disagreements = 0;
                    for (int a = 0; a < n_arms; ++a)
                        for (int b = a + 1; b < n_arms; ++b)
                            if (arms[static_cast<std::size_t>(a)].actions(i, t) !=
                                arms[static_cast<std::size_t>(b)].actions(i, t))
                                ++disagreements;
                    per_time[t] += static_cast<double>(disagreements) / n_pairs;
                }
            }
        }
        per_time /= static_cast<double>(n) * static_cast<double>(num_reps);
    }

    CFMetricReport report;
    report.per_time = per_time;
    report.cf_metric = per_time.mean();
    report.num_individuals = n;
    report.num_arms = n_arms;
    return report;
}

namespace {

std::string format_metric(double v) {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << v;
    return os.str();
}

}  // namespace

std::string ComparisonTable::to_text() const {
    std::vector<std::string> header{""}, value_row{"Value"}, cf_row{"Counterfactual Unfairness Level"};
    for (const auto& e : entries) {
        header.push_back(e.name);
        value_row.push_back(format_metric(e.value));
        cf_row.push_back(format_metric(e.cf_metric));
    }
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c)
        widths[c] = std::max({header[c].size(), value_row[c].size(), cf_row[c].size()});

    auto format_row = [&](const std::vector<std::string>& row) {
        std::ostringstream os;
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << (c ? "  " : "");
            os << row[c] << std::string(widths[c] - row[c].size(), ' ');
        }
        return os.str();
    };
    std::string out = format_row(header) + "\n" + format_row(value_row) + "\n" +
                      format_row(cf_row) + "\n";
    return out;
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream os;
    os << "policy,value,cf_metric\n";
    os.precision(17);
    for (const auto& e : entries) os << e.name << ',' << e.value << ',' << e.cf_metric << '\n';
    return os.str();
}

ComparisonTable compare_baselines(
    const EnvironmentModel& env, const TrajectoryBatch& batch,
    const std::vector<std::pair<std::string, std::shared_ptr<const Policy>>>& policies,
    const FQEConfig& fqe_config, int fairness_reps, std::uint64_t seed) {
    ComparisonTable table;
    for (const auto& [name, policy] : policies) {
        if (!policy) throw ConfigError("compare_baselines: null policy '" + name + "'");
        ComparisonEntry entry;
        entry.name = name;
        ValueReport value = evaluate_value_through_fqe(batch, *policy, fqe_config);
        entry.value = value.value;
        entry.value_converged = value.converged;
        CFMetricReport cf = evaluate_fairness_through_model(env, batch, *policy, seed, fairness_reps);
        entry.cf_metric = cf.cf_metric;
        table.entries.push_back(std::move(entry));
    }
    return table;
}

}  // namespace cfrl
