#ifndef GFLOWSS_FLOW_MATCHING_HPP
#define GFLOWSS_FLOW_MATCHING_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gflowss/fourier_mlp.hpp"
#include "gflowss/subset_mdp.hpp"

namespace gflowss {

using RewardFn = std::function<double(const SubsetState&)>;

struct WeightedAction {
    Action action;
    double weight = 0.0;
};

/// Anything that reports log F(s, a) for every action slot of a state.
/// Entries at illegal slots are ignored by every consumer.
class LogFlowSource {
public:
    virtual ~LogFlowSource() = default;
    virtual const MdpSpec& spec() const = 0;
    virtual Eigen::VectorXd log_edge_flows(const SubsetState& s) const = 0;
};

/// Network-parametrized edge flows: output slot a is log F(s, a).
class FlowModel final : public LogFlowSource {
public:
    FlowModel(const MdpSpec& spec, NetworkParams net);

    /// Initializes a network with input_dim = output_dim = m; the width,
    /// Fourier std and seed come from `arch`.
    static FlowModel create(const MdpSpec& spec, const NetworkConfig& arch);

    const MdpSpec& spec() const override { return spec_; }
    Eigen::VectorXd log_edge_flows(const SubsetState& s) const override;

    const NetworkParams& net() const noexcept { return net_; }
    NetworkParams& net() noexcept { return net_; }

private:
    MdpSpec spec_;
    NetworkParams net_;
};

struct FmTrainConfig {
    std::size_t episodes = 40000;
    double zeta = 0.05;
    double eta = 2e-4;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_widths{150, 150};
    double fourier_std = 0.1;

    void validate() const;
    NetworkConfig network_config(const MdpSpec& spec) const;
};

struct FmTrainResult {
    FlowModel model;
    std::vector<double> loss_trace; // one entry per Adam step
};

/// exp of the log flows at legal slots, ascending action order. Throws
/// TerminalState at terminal states.
std::vector<WeightedAction> edge_flows(const LogFlowSource& source, const SubsetState& s);

/// pi(a|s) = F(s,a) / sum_a' F(s,a'), ascending action order.
std::vector<WeightedAction> sampling_policy(const LogFlowSource& source, const SubsetState& s);

/// in-flow - reward - out-flow at s_prime (out-flow is 0 at terminals).
/// Throws RootState at the root.
double fm_residual(const LogFlowSource& source, const SubsetState& s_prime, double reward);

/// Squared flow-matching residual.
double fm_loss(const LogFlowSource& source, const SubsetState& s_prime, double reward);

struct FmLossGrad {
    double loss = 0.0;
    NetworkGrads grads;
};

/// Loss and its gradient w.r.t. every network parameter; the parent
/// evaluations and the child evaluation run as one batch.
FmLossGrad fm_loss_and_grad(const FlowModel& model, const SubsetState& s_prime, double reward);

/// GFLOW-SS training: on-policy episodes with zeta-uniform exploration and
/// argmax-flow exploitation, one Adam step per visited state.
FmTrainResult train_gflow_ss(const MdpSpec& spec, const RewardFn& reward_fn, const FmTrainConfig& cfg);

/// Samples a terminal state by following the flow policy from the root.
SubsetState sample_terminal(const LogFlowSource& source, std::mt19937_64& rng);

/// Exact terminal law of the flow policy by forward propagation over the
/// DAG; keyed in the order of enumerate_terminals(spec).
std::vector<double> terminal_distribution(const LogFlowSource& source);

/// Deterministic rollout taking the j-th largest edge flow (1-based) at every
/// state, ties broken toward the lower index. Throws RankOutOfRange when a
/// visited state has fewer than j legal actions.
Trajectory rollout_rank(const LogFlowSource& source, std::size_t j);

/// {"format": "gflowss-flow-model", "version": 1, "m", "k", "network"}.
nlohmann::json to_json(const FlowModel& model);
FlowModel flow_model_from_json(const nlohmann::json& j);
void save_model(const FlowModel& model, const std::filesystem::path& path);
FlowModel load_flow_model(const std::filesystem::path& path);

} // namespace gflowss

#endif // GFLOWSS_FLOW_MATCHING_HPP
