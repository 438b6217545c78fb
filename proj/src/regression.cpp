#include "cfrl/regression.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

using json = nlohmann::json;

std::string to_string(ModelType type) {
    return type == ModelType::linear ? "linear" : "nn";
}

ModelType model_type_from_string(const std::string& name) {
    if (name == "linear") return ModelType::linear;
    if (name == "nn") return ModelType::nn;
    throw ConfigError("unknown model type '" + name + "' (expected 'linear' or 'nn')");
}

namespace detail {

Mlp Mlp::initialize(int input_dim, const std::vector<int>& hidden_sizes, int output_dim,
                    std::uint64_t seed) {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
    dims.push_back(output_dim);

    Mlp net;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        layer.w.resize(fan_in, fan_out);
        for (int j = 0; j < fan_out; ++j)
            for (int i = 0; i < fan_in; ++i)
                layer.w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
        layer.b = Eigen::VectorXd::Zero(fan_out);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        h = (h * layers[l].w).rowwise() + layers[l].b.transpose();
        if (l + 1 < layers.size()) h = h.cwiseMax(0.0);  // ReLU on hidden layers
    }
    return h;
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
    return (forward(x) - y).squaredNorm() / static_cast<double>(x.rows() * y.cols());
}

std::vector<Mlp::Layer> Mlp::gradients(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
    const std::size_t n_layers = layers.size();
    std::vector<Eigen::MatrixXd> activations(n_layers + 1);
    activations[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd pre = (activations[l] * layers[l].w).rowwise() + layers[l].b.transpose();
        activations[l + 1] = (l + 1 < n_layers) ? pre.cwiseMax(0.0).eval() : pre;
    }

    std::vector<Layer> grads(n_layers);
    const double scale = 2.0 / static_cast<double>(x.rows() * y.cols());
    Eigen::MatrixXd delta = scale * (activations[n_layers] - y);
    for (std::size_t l = n_layers; l-- > 0;) {
        grads[l].w = activations[l].transpose() * delta;
        grads[l].b = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = delta * layers[l].w.transpose();
            // ReLU mask: activation zero means the unit was clamped
            delta = delta.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return grads;
}

void Mlp::apply_update(const std::vector<Layer>& grads, double learning_rate) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].w -= learning_rate * grads[l].w;
        layers[l].b -= learning_rate * grads[l].b;
    }
}

}  // namespace detail

namespace {

void compute_standardizer(const Eigen::MatrixXd& data, Eigen::VectorXd& mean,
                          Eigen::VectorXd& scale) {
    mean = data.colwise().mean();
    Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
    scale = (centered.array().square().colwise().mean()).sqrt();
    scale = scale.cwiseMax(kScaleFloor);
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& data, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& scale) {
    return (data.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

}  // namespace

const Eigen::MatrixXd& Regressor::linear_weights() const {
    if (type_ != ModelType::linear) throw StateError("linear_weights: model is not linear");
    return lin_w_;
}

Eigen::MatrixXd Regressor::predict(const Eigen::MatrixXd& inputs) const {
    if (!fitted_) throw StateError("predict: regressor has not been fitted");
    if (inputs.cols() != input_dim())
        throw ShapeError("predict: expected " + std::to_string(input_dim()) +
                         " input columns, got " + std::to_string(inputs.cols()));
    Eigen::MatrixXd xs = standardize(inputs, in_mean_, in_scale_);
    Eigen::MatrixXd ys = (type_ == ModelType::linear) ? (xs * lin_w_).eval() : mlp_.forward(xs);
    return (ys.array().rowwise() * out_scale_.transpose().array()).rowwise() +
           out_mean_.transpose().array();
}

std::pair<Regressor, FitReport> fit(const RegressorSpec& spec, const Eigen::MatrixXd& inputs,
                                    const Eigen::MatrixXd& targets) {
    if (inputs.rows() < 1) throw SizeError("fit: need at least one sample");
    if (inputs.cols() < 1 || targets.cols() < 1)
        throw ShapeError("fit: inputs and targets need at least one column");
    if (targets.rows() != inputs.rows())
        throw ShapeError("fit: inputs and targets disagree on sample count");
    if (!inputs.allFinite() || !targets.allFinite())
        throw ValueError("fit: non-finite entries in inputs or targets");
    if (spec.model_type == ModelType::nn) {
        if (spec.hidden_sizes.empty())
            throw ConfigError("fit: nn model requires non-empty hidden_sizes");
        for (int h : spec.hidden_sizes)
            if (h < 1) throw ConfigError("fit: hidden layer sizes must be positive");
        if (spec.max_epochs < 1) throw ConfigError("fit: max_epochs must be >= 1");
        if (!(spec.learning_rate > 0.0)) throw ConfigError("fit: learning_rate must be positive");
    }
    if (!(spec.tolerance > 0.0)) throw ConfigError("fit: tolerance must be positive");

    Regressor model;
    model.type_ = spec.model_type;
    compute_standardizer(inputs, model.in_mean_, model.in_scale_);
    compute_standardizer(targets, model.out_mean_, model.out_scale_);
    Eigen::MatrixXd xs = standardize(inputs, model.in_mean_, model.in_scale_);
    Eigen::MatrixXd ys = standardize(targets, model.out_mean_, model.out_scale_);

    FitReport report;
    // MSE on the original target scale, mean over samples and outputs.
    const Eigen::ArrayXd out_var = model.out_scale_.array().square();
    auto original_scale_loss = [&](const Eigen::MatrixXd& predicted_std) {
        Eigen::ArrayXd per_output =
            (predicted_std - ys).array().square().colwise().mean().transpose();
        return (per_output * out_var).sum() / static_cast<double>(out_var.size());
    };

    if (spec.model_type == ModelType::linear) {
        const Eigen::Index p = xs.cols();
        Eigen::MatrixXd gram = xs.transpose() * xs;
        gram.diagonal().array() += kRidgeLambda;
        model.lin_w_ = gram.ldlt().solve(xs.transpose() * ys);
        model.fitted_ = true;
        report.converged = true;
        report.epochs_run = 1;
        report.loss_curve = {original_scale_loss(xs * model.lin_w_)};
        report.final_loss = report.loss_curve.back();
        (void)p;
        return {std::move(model), report};
    }

    model.hidden_sizes_ = spec.hidden_sizes;
    model.mlp_ = detail::Mlp::initialize(static_cast<int>(xs.cols()), spec.hidden_sizes,
                                         static_cast<int>(ys.cols()), spec.seed);
    for (int epoch = 0; epoch < spec.max_epochs; ++epoch) {
        model.mlp_.apply_update(model.mlp_.gradients(xs, ys), spec.learning_rate);
        double loss = original_scale_loss(model.mlp_.forward(xs));
        if (!std::isfinite(loss)) break;  // diverged: stop, report non-convergence
        report.loss_curve.push_back(loss);
        report.epochs_run = epoch + 1;
        if (report.epochs_run > kConvergenceWindow) {
            double prev = report.loss_curve[static_cast<std::size_t>(report.epochs_run - 1 -
                                                                     kConvergenceWindow)];
            double rel_change = std::abs(prev - loss) / std::max(std::abs(prev), kScaleFloor);
            if (rel_change <= spec.tolerance) {
                report.converged = true;
                break;
            }
        }
    }
    if (report.loss_curve.empty()) {
        report.loss_curve = {std::numeric_limits<double>::infinity()};
        report.epochs_run = 1;
    }
    report.final_loss = report.loss_curve.back();
    model.fitted_ = true;
    return {std::move(model), report};
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
    std::vector<double> data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
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

Eigen::MatrixXd matrix_from_json(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    std::vector<double> flat = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw SchemaError("regressor blob: matrix payload size mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[k++];
    return m;
}

}  // namespace

json Regressor::to_json() const {
    if (!fitted_) throw StateError("to_json: regressor has not been fitted");
    json j;
    j["format"] = "cfrl.regressor";
    j["version"] = 1;
    j["model_type"] = to_string(type_);
    j["input_mean"] = vector_to_json(in_mean_);
    j["input_scale"] = vector_to_json(in_scale_);
    j["output_mean"] = vector_to_json(out_mean_);
    j["output_scale"] = vector_to_json(out_scale_);
    if (type_ == ModelType::linear) {
        j["weights"] = matrix_to_json(lin_w_);
    } else {
        j["hidden_sizes"] = hidden_sizes_;
        json layers = json::array();
        for (const auto& layer : mlp_.layers) {
            json l;
            l["w"] = matrix_to_json(layer.w);
            l["b"] = vector_to_json(layer.b);
            layers.push_back(std::move(l));
        }
        j["layers"] = std::move(layers);
    }
    return j;
}

Regressor Regressor::from_json(const json& blob) {
    if (blob.value("format", "") != "cfrl.regressor")
        throw SchemaError("regressor blob: missing or wrong format tag");
    if (blob.value("version", 0) != 1)
        throw SchemaError("regressor blob: unsupported version");
    Regressor model;
    model.type_ = model_type_from_string(blob.at("model_type").get<std::string>());
    model.in_mean_ = vector_from_json(blob.at("input_mean"));
    model.in_scale_ = vector_from_json(blob.at("input_scale"));
    model.out_mean_ = vector_from_json(blob.at("output_mean"));
    model.out_scale_ = vector_from_json(blob.at("output_scale"));
    if (model.type_ == ModelType::linear) {
        model.lin_w_ = matrix_from_json(blob.at("weights"));
    } else {
        model.hidden_sizes_ = blob.at("hidden_sizes").get<std::vector<int>>();
        for (const auto& l : blob.at("layers")) {
            detail::Mlp::Layer layer;
            layer.w = matrix_from_json(l.at("w"));
            layer.b = vector_from_json(l.at("b"));
            model.mlp_.layers.push_back(std::move(layer));
        }
    }
    model.fitted_ = true;
    return model;
}

void save_regressor(const Regressor& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << model.to_json().dump(2) << '\n';
}

Regressor load_regressor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    json blob = json::parse(in);
    return Regressor::from_json(blob);
}

}  // namespace cfrl
