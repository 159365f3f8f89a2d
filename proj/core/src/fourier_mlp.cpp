#include "gflowss/fourier_mlp.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "gflowss/error.hpp"

namespace gflowss {

namespace {

enum class Activation { Sine, Relu, Identity };

Activation activation_of(std::size_t layer, std::size_t layer_count) {
    if (layer + 1 == layer_count) return Activation::Identity;
    return layer == 0 ? Activation::Sine : Activation::Relu;
}

void check_input(const NetworkParams& params, Eigen::Index rows) {
    if (params.layers.empty()) {
        throw Error(ErrorCode::InvalidArgument, "network has no layers");
    }
    if (rows != params.layers.front().weight.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(rows) + " rows, network expects " +
                                                      std::to_string(params.layers.front().weight.cols()));
    }
}

} // namespace

void NetworkConfig::validate() const {
    if (input_dim < 1 || output_dim < 1) {
        throw Error(ErrorCode::InvalidArgument, "network input/output dims must be >= 1");
    }
    if (hidden_widths.empty()) {
        throw Error(ErrorCode::InvalidArgument, "network needs at least one hidden layer");
    }
    for (std::size_t w : hidden_widths) {
        if (w < 1) throw Error(ErrorCode::InvalidArgument, "hidden widths must be >= 1");
    }
    if (!(fourier_std > 0.0) || !std::isfinite(fourier_std)) {
        throw Error(ErrorCode::InvalidArgument, "fourier_std must be positive");
    }
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z;
    z.config = config;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
        z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return z;
}

bool NetworkParams::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

NetworkParams init_network(const NetworkConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    NetworkParams params;
    params.config = cfg;

    std::vector<std::size_t> dims;
    dims.push_back(cfg.input_dim);
    dims.insert(dims.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
    dims.push_back(cfg.output_dim);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto fan_in = static_cast<Eigen::Index>(dims[l]);
        const auto fan_out = static_cast<Eigen::Index>(dims[l + 1]);
        DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        if (l == 0) {
            std::normal_distribution<double> normal(0.0, cfg.fourier_std);
            for (Eigen::Index i = 0; i < fan_out; ++i)
                for (Eigen::Index j = 0; j < fan_in; ++j) layer.weight(i, j) = normal(rng);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> uniform(-bound, bound);
            for (Eigen::Index i = 0; i < fan_out; ++i)
                for (Eigen::Index j = 0; j < fan_in; ++j) layer.weight(i, j) = uniform(rng);
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& x, ForwardTape* tape) {
    check_input(params, x.rows());
    const std::size_t count = params.layers.size();
    if (tape) {
        tape->inputs.assign(count, Eigen::MatrixXd());
        tape->preactivations.assign(count, Eigen::MatrixXd());
    }
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < count; ++l) {
        const auto& layer = params.layers[l];
        Eigen::MatrixXd z = layer.weight * a;
        z.colwise() += layer.bias;
        if (tape) tape->inputs[l] = std::move(a);
        switch (activation_of(l, count)) {
            case Activation::Sine: a = z.array().sin().matrix(); break;
            case Activation::Relu: a = z.cwiseMax(0.0); break;
            case Activation::Identity: a = z; break;
        }
        if (tape) tape->preactivations[l] = std::move(z);
    }
    return a;
}

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::VectorXd& x) {
    return forward_batch(params, x);
}

NetworkGrads backward(const NetworkParams& params, const ForwardTape& tape, const Eigen::MatrixXd& out_grad,
                      Eigen::MatrixXd* input_grad) {
    const std::size_t count = params.layers.size();
    if (tape.inputs.size() != count || tape.preactivations.size() != count) {
        throw Error(ErrorCode::DimensionMismatch, "forward tape does not match the network");
    }
    if (out_grad.rows() != params.layers.back().weight.rows() || out_grad.cols() != tape.inputs.front().cols()) {
        throw Error(ErrorCode::DimensionMismatch, "output gradient shape does not match the forward batch");
    }
    NetworkGrads grads;
    grads.config = params.config;
    grads.layers.resize(count);

    Eigen::MatrixXd g = out_grad;
    for (std::size_t l = count; l-- > 0;) {
        const Eigen::MatrixXd& z = tape.preactivations[l];
        switch (activation_of(l, count)) {
            case Activation::Sine: g.array() *= z.array().cos(); break;
            // Subgradient 0 at the kink.
            case Activation::Relu: g.array() *= (z.array() > 0.0).cast<double>(); break;
            case Activation::Identity: break;
        }
        grads.layers[l].weight.noalias() = g * tape.inputs[l].transpose();
        grads.layers[l].bias = g.rowwise().sum();
        if (l > 0 || input_grad) {
            g = params.layers[l].weight.transpose() * g;
        }
    }
    if (input_grad) *input_grad = std::move(g);
    return grads;
}

NetworkGrads backward(const NetworkParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& out_grad,
                      Eigen::VectorXd* input_grad) {
    ForwardTape tape;
    forward_batch(params, x, &tape);
    if (!input_grad) return backward(params, tape, out_grad, nullptr);
    Eigen::MatrixXd ig;
    NetworkGrads g = backward(params, tape, out_grad, &ig);
    *input_grad = ig.col(0);
    return g;
}

AdamState AdamState::for_params(const NetworkParams& params, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    return s;
}

void adam_step(NetworkParams& params, const NetworkGrads& grads, AdamState& state) {
    if (grads.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size()) {
        throw Error(ErrorCode::DimensionMismatch, "gradient/optimizer layout does not match parameters");
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        if (grads.layers[l].weight.rows() != params.layers[l].weight.rows() ||
            grads.layers[l].weight.cols() != params.layers[l].weight.cols() ||
            grads.layers[l].bias.size() != params.layers[l].bias.size()) {
            throw Error(ErrorCode::DimensionMismatch, "gradient shape mismatch at layer " + std::to_string(l));
        }
    }
    if (!grads.all_finite()) {
        throw Error(ErrorCode::NonFiniteGradient, "gradient contains NaN or Inf");
    }

    ++state.t;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    const double lr = state.learning_rate;
    const double eps = state.eps;

    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grads.layers[l].weight, state.first_moment.layers[l].weight,
               state.second_moment.layers[l].weight);
        update(params.layers[l].bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
               state.second_moment.layers[l].bias);
    }
}

nlohmann::json to_json(const NetworkConfig& cfg) {
    return nlohmann::json{{"input_dim", cfg.input_dim},     {"hidden_widths", cfg.hidden_widths},
                          {"output_dim", cfg.output_dim},   {"fourier_std", cfg.fourier_std},
                          {"seed", cfg.seed}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
    cfg.output_dim = j.at("output_dim").get<std::size_t>();
    cfg.fourier_std = j.at("fourier_std").get<double>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const NetworkParams& params) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : params.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) w.push_back(l.weight(i, j));
        layers.push_back({{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"weight", std::move(w)},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return nlohmann::json{{"format", "gflowss-mlp"}, {"version", 1}, {"config", to_json(params.config)}, {"layers", layers}};
}

NetworkParams network_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "gflowss-mlp") {
        throw Error(ErrorCode::Io, "not a gflowss-mlp checkpoint");
    }
    NetworkParams params;
    params.config = network_config_from_json(j.at("config"));
    const NetworkParams expected = init_network(params.config);
    const auto& layers = j.at("layers");
    if (layers.size() != expected.layers.size()) {
        throw Error(ErrorCode::DimensionMismatch, "checkpoint layer count does not match its config");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto rows = layers[l].at("rows").get<Eigen::Index>();
        const auto cols = layers[l].at("cols").get<Eigen::Index>();
        const auto w = layers[l].at("weight").get<std::vector<double>>();
        const auto b = layers[l].at("bias").get<std::vector<double>>();
        if (rows != expected.layers[l].weight.rows() || cols != expected.layers[l].weight.cols() ||
            static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
            throw Error(ErrorCode::DimensionMismatch, "checkpoint layer " + std::to_string(l) + " has the wrong shape");
        }
        DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index c = 0; c < cols; ++c) layer.weight(i, c) = w[static_cast<std::size_t>(i * cols + c)];
        for (Eigen::Index i = 0; i < rows; ++i) layer.bias(i) = b[static_cast<std::size_t>(i)];
        params.layers.push_back(std::move(layer));
    }
    if (!params.all_finite()) {
        throw Error(ErrorCode::Io, "checkpoint contains non-finite parameters");
    }
    return params;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json(params).dump() << '\n';
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return network_from_json(nlohmann::json::parse(in));
}

} // namespace gflowss
