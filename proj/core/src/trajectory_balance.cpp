#include "gflowss/trajectory_balance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gflowss/error.hpp"

namespace gflowss {

namespace {

Eigen::VectorXd encode(const SubsetState& s, double n) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.size()) + 1);
    for (std::size_t i = 0; i < s.size(); ++i) x(static_cast<Eigen::Index>(i)) = s.test(i) ? 1.0 : 0.0;
    x(static_cast<Eigen::Index>(s.size())) = n;
    return x;
}

/// Log-softmax over the legal slots of `logits`; illegal slots get -inf.
Eigen::VectorXd masked_log_softmax(const Eigen::VectorXd& logits, const SubsetState& s) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!s.test(static_cast<std::size_t>(i))) peak = std::max(peak, logits(i));
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!s.test(static_cast<std::size_t>(i))) total += std::exp(logits(i) - peak);
    }
    const double log_norm = peak + std::log(total);
    Eigen::VectorXd out(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        out(i) = s.test(static_cast<std::size_t>(i)) ? -std::numeric_limits<double>::infinity() : logits(i) - log_norm;
    }
    return out;
}

Action draw(const std::vector<WeightedAction>& policy, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    for (const auto& wa : policy) {
        if (u < wa.weight) return wa.action;
        u -= wa.weight;
    }
    return policy.back().action;
}

} // namespace

Preference::Preference(double n) : n_(n) {
    if (!(n > 0.0 && n < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "preference n must lie in (0, 1), got " + std::to_string(n));
    }
}

TbModel::TbModel(const MdpSpec& spec, NetworkParams forward_net, NetworkParams logz_net)
    : spec_(spec), forward_net_(std::move(forward_net)), logz_net_(std::move(logz_net)) {
    spec_.validate();
    if (forward_net_.config.input_dim != spec_.m + 1 || forward_net_.config.output_dim != spec_.m) {
        throw Error(ErrorCode::DimensionMismatch, "forward net must map m+1 inputs to m logits");
    }
    if (logz_net_.config.input_dim != 1 || logz_net_.config.output_dim != 1) {
        throw Error(ErrorCode::DimensionMismatch, "log-partition net must be scalar to scalar");
    }
}

Eigen::VectorXd TbModel::logits(const SubsetState& s, const Preference& pref) const {
    if (s.size() != spec_.m) throw Error(ErrorCode::DimensionMismatch, "state length differs from m");
    return forward(forward_net_, encode(s, pref.n()));
}

double TbModel::log_z(const Preference& pref) const {
    Eigen::VectorXd x(1);
    x(0) = pref.n();
    return forward(logz_net_, x)(0);
}

void TbTrainConfig::validate() const {
    if (beta_dictionary.empty()) throw Error(ErrorCode::InvalidArgument, "preference dictionary is empty");
    for (double n : beta_dictionary) Preference{n};
    if (!(zeta >= 0.0 && zeta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "zeta must lie in [0, 1]");
    if (!(eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (log_z_every == 0) throw Error(ErrorCode::InvalidArgument, "log_z_every must be >= 1");
}

TbModel make_tb_model(const MdpSpec& spec, const TbTrainConfig& cfg) {
    NetworkConfig fwd;
    fwd.input_dim = spec.m + 1;
    fwd.output_dim = spec.m;
    fwd.hidden_widths = cfg.hidden_widths;
    fwd.fourier_std = cfg.forward_fourier_std;
    fwd.seed = cfg.seed;

    NetworkConfig lz;
    lz.input_dim = 1;
    lz.output_dim = 1;
    lz.hidden_widths = cfg.hidden_widths;
    lz.fourier_std = cfg.logz_fourier_std;
    lz.seed = cfg.seed + 0x9e3779b97f4a7c15ULL;

    return TbModel(spec, init_network(fwd), init_network(lz));
}

std::vector<WeightedAction> forward_policy(const TbModel& model, const SubsetState& s, const Preference& pref) {
    if (is_terminal(s, model.spec())) {
        throw Error(ErrorCode::TerminalState, "state " + s.to_string() + " has no outgoing edges");
    }
    const Eigen::VectorXd lp = masked_log_softmax(model.logits(s, pref), s);
    std::vector<WeightedAction> out;
    for (Action a : allowed_actions(s, model.spec())) {
        out.push_back({a, std::exp(lp(static_cast<Eigen::Index>(a.index)))});
    }
    return out;
}

double backward_policy(const SubsetState& s_prime) {
    if (s_prime.ones() == 0) throw Error(ErrorCode::RootState, "the root has no parents");
    return 1.0 / static_cast<double>(s_prime.ones());
}

double tb_loss(const TbTerms& t) noexcept {
    const double delta = t.log_z + t.sum_log_pf - t.log_reward - t.sum_log_pb;
    return delta * delta;
}

TbTerms tb_terms(const TbModel& model, const Trajectory& tau, double log_reward, const Preference& pref) {
    validate_trajectory(model.spec(), tau);
    TbTerms terms;
    terms.log_z = model.log_z(pref);
    terms.log_reward = log_reward;
    for (std::size_t t = 0; t < tau.actions.size(); ++t) {
        const Eigen::VectorXd lp = masked_log_softmax(model.logits(tau.states[t], pref), tau.states[t]);
        terms.sum_log_pf += lp(static_cast<Eigen::Index>(tau.actions[t].index));
        terms.sum_log_pb += std::log(backward_policy(tau.states[t + 1]));
    }
    return terms;
}

double tb_loss(const TbModel& model, const Trajectory& tau, double reward, const Preference& pref) {
    if (!(reward > 0.0)) throw Error(ErrorCode::NonPositiveReward, "trajectory balance needs reward > 0");
    return tb_loss(tb_terms(model, tau, std::log(reward), pref));
}

TbLossGrad tb_loss_and_grad(const TbModel& model, const Trajectory& tau, double log_reward, const Preference& pref) {
    const MdpSpec& spec = model.spec();
    validate_trajectory(spec, tau);
    const auto steps = static_cast<Eigen::Index>(tau.actions.size());
    const auto m = static_cast<Eigen::Index>(spec.m);

    Eigen::MatrixXd x(m + 1, steps);
    for (Eigen::Index t = 0; t < steps; ++t) x.col(t) = encode(tau.states[static_cast<std::size_t>(t)], pref.n());
    ForwardTape fwd_tape;
    const Eigen::MatrixXd logits = forward_batch(model.forward_net(), x, &fwd_tape);

    Eigen::MatrixXd z_in(1, 1);
    z_in(0, 0) = pref.n();
    ForwardTape z_tape;
    const double log_z = forward_batch(model.logz_net(), z_in, &z_tape)(0, 0);

    double sum_log_pf = 0.0;
    double sum_log_pb = 0.0;
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(m, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        const SubsetState& s = tau.states[static_cast<std::size_t>(t)];
        const Eigen::VectorXd lp = masked_log_softmax(logits.col(t), s);
        sum_log_pf += lp(static_cast<Eigen::Index>(tau.actions[static_cast<std::size_t>(t)].index));
        sum_log_pb += std::log(backward_policy(tau.states[static_cast<std::size_t>(t) + 1]));
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!s.test(static_cast<std::size_t>(i))) probs(i, t) = std::exp(lp(i));
        }
    }
    const double delta = log_z + sum_log_pf - log_reward - sum_log_pb;

    // d log softmax_a / d logit_i = [i == a] - p_i over the legal slots.
    Eigen::MatrixXd logit_grad = -probs;
    for (Eigen::Index t = 0; t < steps; ++t) {
        logit_grad(static_cast<Eigen::Index>(tau.actions[static_cast<std::size_t>(t)].index), t) += 1.0;
    }
    logit_grad *= 2.0 * delta;

    TbLossGrad out;
    out.loss = delta * delta;
    out.forward_grads = backward(model.forward_net(), fwd_tape, logit_grad);
    out.logz_grads = backward(model.logz_net(), z_tape, Eigen::MatrixXd::Constant(1, 1, 2.0 * delta));
    return out;
}

TbTrainResult train_mogflow_ss(const MdpSpec& spec, const ConditionedRewardFn& reward_fn, const TbTrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    TbTrainResult result{make_tb_model(spec, cfg), {}, {}};
    TbModel& model = result.model;
    AdamState fwd_adam = AdamState::for_params(model.forward_net(), cfg.eta);
    AdamState z_adam = AdamState::for_params(model.logz_net(), cfg.eta);
    std::mt19937_64 rng(cfg.seed ^ 0x7b7b7b7bULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_n(0, cfg.beta_dictionary.size() - 1);
    result.loss_trace.reserve(cfg.episodes);

    for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
        const Preference pref(cfg.beta_dictionary[pick_n(rng)]);
        Trajectory tau;
        tau.states.push_back(root(spec));
        while (!is_terminal(tau.states.back(), spec)) {
            const SubsetState& s = tau.states.back();
            Action a;
            if (unit(rng) < cfg.zeta) {
                const auto legal = allowed_actions(s, spec);
                std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
                a = legal[pick(rng)];
            } else {
                a = draw(forward_policy(model, s, pref), rng);
            }
            tau.states.push_back(apply_action(s, a, spec));
            tau.actions.push_back(a);
        }
        const double reward = reward_fn(tau.terminal(), pref.n());
        if (!(reward > 0.0) || !std::isfinite(reward)) {
            throw Error(ErrorCode::NonPositiveReward, "conditioned reward must be positive and finite");
        }
        TbLossGrad lg = tb_loss_and_grad(model, tau, std::log(reward), pref);
        // Joint step: both checks run before either network moves.
        if (!lg.forward_grads.all_finite() || !lg.logz_grads.all_finite()) {
            throw Error(ErrorCode::NonFiniteGradient, "trajectory-balance gradient contains NaN or Inf");
        }
        adam_step(model.forward_net(), lg.forward_grads, fwd_adam);
        adam_step(model.logz_net(), lg.logz_grads, z_adam);
        result.loss_trace.push_back({episode, lg.loss, pref.n()});

        if (episode % cfg.log_z_every == 0 || episode + 1 == cfg.episodes) {
            for (double n : cfg.beta_dictionary) {
                result.log_z_trace.push_back({episode, n, model.log_z(Preference(n))});
            }
        }
    }
    return result;
}

Trajectory rollout_conditioned(const TbModel& model, const Preference& pref, std::size_t j) {
    const MdpSpec& spec = model.spec();
    if (j == 0) throw Error(ErrorCode::RankOutOfRange, "rank is 1-based");
    Trajectory tau;
    tau.states.push_back(root(spec));
    while (!is_terminal(tau.states.back(), spec)) {
        const SubsetState& s = tau.states.back();
        auto legal = allowed_actions(s, spec);
        if (j > legal.size()) {
            throw Error(ErrorCode::RankOutOfRange, "rank " + std::to_string(j) + " requested at a state with " +
                                                       std::to_string(legal.size()) + " legal actions");
        }
        const Eigen::VectorXd lg = model.logits(s, pref);
        std::stable_sort(legal.begin(), legal.end(), [&](Action a, Action b) {
            return lg(static_cast<Eigen::Index>(a.index)) > lg(static_cast<Eigen::Index>(b.index));
        });
        const Action a = legal[j - 1];
        tau.states.push_back(apply_action(s, a, spec));
        tau.actions.push_back(a);
    }
    return tau;
}

SubsetState sample_terminal(const TbModel& model, const Preference& pref, std::mt19937_64& rng) {
    SubsetState s = root(model.spec());
    while (!is_terminal(s, model.spec())) {
        s = apply_action(s, draw(forward_policy(model, s, pref), rng), model.spec());
    }
    return s;
}

nlohmann::json to_json(const TbModel& model) {
    return nlohmann::json{{"format", "gflowss-tb-model"},
                          {"version", 1},
                          {"m", model.spec().m},
                          {"k", model.spec().k},
                          {"forward", to_json(model.forward_net())},
                          {"logz", to_json(model.logz_net())}};
}

TbModel tb_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gflowss-tb-model" || j.value("version", 0) != 1) {
        throw Error(ErrorCode::InvalidArgument, "not a version-1 trajectory-balance checkpoint");
    }
    return TbModel(MdpSpec(j.at("m").get<std::size_t>(), j.at("k").get<std::size_t>()),
                   network_from_json(j.at("forward")), network_from_json(j.at("logz")));
}

void save_model(const TbModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json(model).dump() << '\n';
}

TbModel load_tb_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return tb_model_from_json(nlohmann::json::parse(in));
}

} // namespace gflowss
