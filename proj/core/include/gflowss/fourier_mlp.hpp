#ifndef GFLOWSS_FOURIER_MLP_HPP
#define GFLOWSS_FOURIER_MLP_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace gflowss {

/// Layer 0 is affine + sin (the learnable Fourier-feature kernel), hidden
/// layers after it are affine + ReLU, the last layer is affine only.
struct NetworkConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_widths{150, 150};
    std::size_t output_dim = 1;
    double fourier_std = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;
};

struct NetworkParams {
    NetworkConfig config;
    std::vector<DenseLayer> layers;

    std::size_t parameter_count() const;
    /// A zero-valued bundle with the same shapes.
    NetworkParams zeros_like() const;
    bool all_finite() const;
};

/// Gradients share the parameter layout.
using NetworkGrads = NetworkParams;

/// Per-layer intermediates saved by forward for the backward pass.
/// Column j of every matrix belongs to input column j.
struct ForwardTape {
    std::vector<Eigen::MatrixXd> inputs;      // input to each layer
    std::vector<Eigen::MatrixXd> preactivations;
};

/// Fourier weights ~ Normal(0, fourier_std^2); later layers uniform in
/// +-1/sqrt(fan_in); all biases zero. Deterministic in cfg.seed.
NetworkParams init_network(const NetworkConfig& cfg);

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::VectorXd& x);

/// Evaluates every column of `x`. When `tape` is non-null the intermediates
/// needed by backward are stored in it.
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& x, ForwardTape* tape = nullptr);

/// Reverse-mode pass for sum_j out_grad.col(j) . forward(x.col(j)).
/// Parameter gradients are summed over the batch. If `input_grad` is
/// non-null it receives d/dx, one column per input column.
NetworkGrads backward(const NetworkParams& params, const ForwardTape& tape, const Eigen::MatrixXd& out_grad,
                      Eigen::MatrixXd* input_grad = nullptr);

/// Convenience overload that runs the forward pass itself.
NetworkGrads backward(const NetworkParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& out_grad,
                      Eigen::VectorXd* input_grad = nullptr);

/// Adam with bias correction.
struct AdamState {
    std::uint64_t t = 0;
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    NetworkParams first_moment;
    NetworkParams second_moment;

    static AdamState for_params(const NetworkParams& params, double learning_rate);
};

/// Throws NonFiniteGradient (leaving params and state untouched) if any
/// gradient entry is NaN or infinite.
void adam_step(NetworkParams& params, const NetworkGrads& grads, AdamState& state);

/// Flat JSON checkpoint; layout documented in README.md.
nlohmann::json to_json(const NetworkParams& params);
NetworkParams network_from_json(const nlohmann::json& j);
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

} // namespace gflowss

#endif // GFLOWSS_FOURIER_MLP_HPP
