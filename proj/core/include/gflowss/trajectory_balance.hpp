#ifndef GFLOWSS_TRAJECTORY_BALANCE_HPP
#define GFLOWSS_TRAJECTORY_BALANCE_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gflowss/flow_matching.hpp"
#include "gflowss/fourier_mlp.hpp"
#include "gflowss/subset_mdp.hpp"

namespace gflowss {

/// Scalar n in (0, 1) standing for the weights beta = [n, 1 - n] on the
/// radar (inverse CRB) and communication-rate terms.
class Preference {
public:
    explicit Preference(double n);

    double n() const noexcept { return n_; }
    double beta_crb() const noexcept { return n_; }
    double beta_rate() const noexcept { return 1.0 - n_; }
    std::array<double, 2> beta() const noexcept { return {n_, 1.0 - n_}; }

private:
    double n_;
};

/// Preference-conditioned forward policy plus the learnable log-partition
/// network. The forward net sees the state mask with n appended.
class TbModel {
public:
    TbModel(const MdpSpec& spec, NetworkParams forward_net, NetworkParams logz_net);

    const MdpSpec& spec() const noexcept { return spec_; }
    const NetworkParams& forward_net() const noexcept { return forward_net_; }
    NetworkParams& forward_net() noexcept { return forward_net_; }
    const NetworkParams& logz_net() const noexcept { return logz_net_; }
    NetworkParams& logz_net() noexcept { return logz_net_; }

    /// Raw forward-policy logits for every slot (illegal ones included).
    Eigen::VectorXd logits(const SubsetState& s, const Preference& pref) const;
    double log_z(const Preference& pref) const;

private:
    MdpSpec spec_;
    NetworkParams forward_net_;
    NetworkParams logz_net_;
};

struct TbTrainConfig {
    std::size_t episodes = 60000;
    double zeta = 0.05;
    double eta = 1e-5;
    std::vector<double> beta_dictionary{0.1, 0.5, 0.9};
    /// Inner beamformer steps; read by the reward wiring, not by the trainer.
    std::size_t n_wir = 50;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_widths{150, 150};
    double forward_fourier_std = 0.1;
    double logz_fourier_std = 0.001;
    /// log Z is recorded for every dictionary entry every this many episodes.
    std::size_t log_z_every = 1;

    void validate() const;
};

TbModel make_tb_model(const MdpSpec& spec, const TbTrainConfig& cfg);

/// Softmax over legal-action logits; ascending action order.
/// Throws TerminalState at terminal states.
std::vector<WeightedAction> forward_policy(const TbModel& model, const SubsetState& s, const Preference& pref);

/// Uniform parent prior 1 / ||s'||_0. Throws RootState at the root.
double backward_policy(const SubsetState& s_prime);

/// The four log-space sums entering the trajectory-balance residual.
struct TbTerms {
    double log_z = 0.0;
    double sum_log_pf = 0.0;
    double log_reward = 0.0;
    double sum_log_pb = 0.0;
};

/// (log Z + sum log P_F - log R - sum log P_B)^2.
double tb_loss(const TbTerms& terms) noexcept;

TbTerms tb_terms(const TbModel& model, const Trajectory& tau, double log_reward, const Preference& pref);

/// Throws NonPositiveReward unless reward > 0.
double tb_loss(const TbModel& model, const Trajectory& tau, double reward, const Preference& pref);

struct TbLossGrad {
    double loss = 0.0;
    NetworkGrads forward_grads;
    NetworkGrads logz_grads;
};

TbLossGrad tb_loss_and_grad(const TbModel& model, const Trajectory& tau, double log_reward, const Preference& pref);

using ConditionedRewardFn = std::function<double(const SubsetState&, double n)>;

struct TbLossRecord {
    std::size_t episode = 0;
    double loss = 0.0;
    double n = 0.0;
};

struct LogZRecord {
    std::size_t episode = 0;
    double n = 0.0;
    double log_z = 0.0;
};

struct TbTrainResult {
    TbModel model;
    std::vector<TbLossRecord> loss_trace;
    std::vector<LogZRecord> log_z_trace;
};

/// MOGFLOW-SS: per episode draw n from the dictionary, roll out one
/// trajectory (zeta-uniform exploration, otherwise sampled from the forward
/// policy), and take one joint Adam step on the trajectory-balance loss.
TbTrainResult train_mogflow_ss(const MdpSpec& spec, const ConditionedRewardFn& reward_fn, const TbTrainConfig& cfg);

/// Deterministic j-th-best rollout under the conditioned forward policy.
Trajectory rollout_conditioned(const TbModel& model, const Preference& pref, std::size_t j);

/// Samples a terminal from the conditioned forward policy (no exploration).
SubsetState sample_terminal(const TbModel& model, const Preference& pref, std::mt19937_64& rng);

/// {"format": "gflowss-tb-model", "version": 1, "m", "k", "forward", "logz"}.
nlohmann::json to_json(const TbModel& model);
TbModel tb_model_from_json(const nlohmann::json& j);
void save_model(const TbModel& model, const std::filesystem::path& path);
TbModel load_tb_model(const std::filesystem::path& path);

} // namespace gflowss

#endif // GFLOWSS_TRAJECTORY_BALANCE_HPP
