#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace cfrl::detail {

/// Plain fully connected network with ReLU hidden layers and a linear output
/// layer, trained by full-batch gradient descent on mean squared error.
/// Operates in whatever scale the caller provides; standardization is the
/// caller's concern.
struct Mlp {
    struct Layer {
        Eigen::MatrixXd w;  // fan_in x fan_out
        Eigen::VectorXd b;  // fan_out
    };
    std::vector<Layer> layers;

    static Mlp initialize(int input_dim, const std::vector<int>& hidden_sizes, int output_dim,
                          std::uint64_t seed);

    /// Rows of x are samples.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    /// Mean over samples and outputs of squared error.
    double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;

    /// Analytic gradient of loss() with respect to every weight and bias.
    std::vector<Layer> gradients(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;

    void apply_update(const std::vector<Layer>& grads, double learning_rate);
};

}  // namespace cfrl::detail
