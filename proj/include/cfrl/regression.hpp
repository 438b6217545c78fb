#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cfrl/detail/mlp.hpp"

namespace cfrl {

enum class ModelType { linear, nn };

std::string to_string(ModelType type);
ModelType model_type_from_string(const std::string& name);

/// Configuration for a multi-output regression fit. `hidden_sizes`,
/// `max_epochs`, `learning_rate` and `tolerance` apply to the nn model;
/// the linear model is an exact ridge solve and ignores them.
struct RegressorSpec {
    ModelType model_type = ModelType::linear;
    std::vector<int> hidden_sizes = {64};
    int max_epochs = 500;
    double learning_rate = 1e-2;
    double tolerance = 1e-5;
    std::uint64_t seed = 0;
};

/// Outcome of a fit. `converged` means the relative loss change over the
/// trailing window dropped below the spec tolerance (always true for the
/// closed-form linear solve). loss_curve holds one entry per epoch run, on
/// the original target scale.
struct FitReport {
    double final_loss = 0.0;
    int epochs_run = 0;
    bool converged = false;
    std::vector<double> loss_curve;
};

/// A fitted multi-output regressor. Immutable after fitting; predictions are
/// deterministic. Inputs and targets are standardized internally (per-feature
/// mean and scale from the training data, scale floor 1e-12) and predictions
/// are mapped back to the original scale.
class Regressor {
public:
    Regressor() = default;

    /// Predicts targets for `inputs` (rows are samples). Throws ShapeError on
    /// width mismatch and StateError if the regressor was never fitted.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs) const;

    bool fitted() const { return fitted_; }
    int input_dim() const { return static_cast<int>(in_mean_.size()); }
    int output_dim() const { return static_cast<int>(out_mean_.size()); }
    ModelType model_type() const { return type_; }

    /// Linear coefficients on the standardized scale (p x q). Linear models only.
    const Eigen::MatrixXd& linear_weights() const;

    nlohmann::json to_json() const;
    static Regressor from_json(const nlohmann::json& blob);

private:
    friend std::pair<Regressor, FitReport> fit(const RegressorSpec&, const Eigen::MatrixXd&,
                                               const Eigen::MatrixXd&);

    ModelType type_ = ModelType::linear;
    bool fitted_ = false;
    Eigen::VectorXd in_mean_, in_scale_;
    Eigen::VectorXd out_mean_, out_scale_;
    Eigen::MatrixXd lin_w_;  // standardized-scale coefficients, p x q
    detail::Mlp mlp_;
    std::vector<int> hidden_sizes_;
};

/// Ridge penalty applied by the linear model (standardized scale, intercept
/// handled by centering so it is effectively unpenalized).
inline constexpr double kRidgeLambda = 1e-8;
inline constexpr double kScaleFloor = 1e-12;
inline constexpr int kConvergenceWindow = 10;

/// Fits a regressor to `inputs` (n x p) and `targets` (n x q). The linear
/// model solves the ridge normal equations exactly; the nn model runs
/// full-batch gradient descent, deterministic given spec.seed, stopping early
/// once the relative loss change over a 10-epoch window falls below
/// spec.tolerance.
std::pair<Regressor, FitReport> fit(const RegressorSpec& spec, const Eigen::MatrixXd& inputs,
                                    const Eigen::MatrixXd& targets);

void save_regressor(const Regressor& model, const std::string& path);
Regressor load_regressor(const std::string& path);

}  // namespace cfrl
