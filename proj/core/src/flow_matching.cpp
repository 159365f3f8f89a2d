#include "gflowss/flow_matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "gflowss/error.hpp"

namespace gflowss {

namespace {

Eigen::VectorXd encode(const SubsetState& s) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) x(static_cast<Eigen::Index>(i)) = s.test(i) ? 1.0 : 0.0;
    return x;
}

void require_non_terminal(const SubsetState& s, const MdpSpec& spec) {
    if (is_terminal(s, spec)) {
        throw Error(ErrorCode::TerminalState, "state " + s.to_string() + " has no outgoing edges");
    }
}

Action argmax_legal(const Eigen::VectorXd& log_flows, const SubsetState& s, const MdpSpec& spec) {
    Action best{spec.m};
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.m; ++i) {
        if (s.test(i)) continue;
        const double v = log_flows(static_cast<Eigen::Index>(i));
        if (best.index == spec.m || v > best_value) {
            best = Action{i};
            best_value = v;
        }
    }
    return best;
}

} // namespace

FlowModel::FlowModel(const MdpSpec& spec, NetworkParams net) : spec_(spec), net_(std::move(net)) {
    spec_.validate();
    if (net_.config.input_dim != spec_.m || net_.config.output_dim != spec_.m) {
        throw Error(ErrorCode::DimensionMismatch, "flow network must map m inputs to m outputs");
    }
}

FlowModel FlowModel::create(const MdpSpec& spec, const NetworkConfig& arch) {
    NetworkConfig cfg = arch;
    cfg.input_dim = spec.m;
    cfg.output_dim = spec.m;
    return FlowModel(spec, init_network(cfg));
}

Eigen::VectorXd FlowModel::log_edge_flows(const SubsetState& s) const {
    if (s.size() != spec_.m) throw Error(ErrorCode::DimensionMismatch, "state length differs from m");
    return forward(net_, encode(s));
}

void FmTrainConfig::validate() const {
    if (!(zeta >= 0.0 && zeta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "zeta must lie in [0, 1]");
    if (!(eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
}

NetworkConfig FmTrainConfig::network_config(const MdpSpec& spec) const {
    NetworkConfig cfg;
    cfg.input_dim = spec.m;
    cfg.output_dim = spec.m;
    cfg.hidden_widths = hidden_widths;
    cfg.fourier_std = fourier_std;
    cfg.seed = seed;
    return cfg;
}

std::vector<WeightedAction> edge_flows(const LogFlowSource& source, const SubsetState& s) {
    const MdpSpec& spec = source.spec();
    require_non_terminal(s, spec);
    const Eigen::VectorXd lf = source.log_edge_flows(s);
    std::vector<WeightedAction> out;
    for (Action a : allowed_actions(s, spec)) {
        out.push_back({a, std::exp(lf(static_cast<Eigen::Index>(a.index)))});
    }
    return out;
}

std::vector<WeightedAction> sampling_policy(const LogFlowSource& source, const SubsetState& s) {
    const MdpSpec& spec = source.spec();
    require_non_terminal(s, spec);
    const Eigen::VectorXd lf = source.log_edge_flows(s);
    const auto legal = allowed_actions(s, spec);
    // Normalize in log space so large flows do not overflow.
    double peak = -std::numeric_limits<double>::infinity();
    for (Action a : legal) peak = std::max(peak, lf(static_cast<Eigen::Index>(a.index)));
    std::vector<WeightedAction> out;
    out.reserve(legal.size());
    double total = 0.0;
    for (Action a : legal) {
        const double w = std::exp(lf(static_cast<Eigen::Index>(a.index)) - peak);
        out.push_back({a, w});
        total += w;
    }
    for (auto& wa : out) wa.weight /= total;
    return out;
}

double fm_residual(const LogFlowSource& source, const SubsetState& s_prime, double reward) {
    const MdpSpec& spec = source.spec();
    if (s_prime.ones() == 0) throw Error(ErrorCode::RootState, "the root has no in-flow");
    double in_flow = 0.0;
    for (const auto& [parent, a] : parents(s_prime)) {
        in_flow += std::exp(source.log_edge_flows(parent)(static_cast<Eigen::Index>(a.index)));
    }
    double out_flow = 0.0;
    if (!is_terminal(s_prime, spec)) {
        const Eigen::VectorXd lf = source.log_edge_flows(s_prime);
        for (std::size_t i = 0; i < spec.m; ++i) {
            if (!s_prime.test(i)) out_flow += std::exp(lf(static_cast<Eigen::Index>(i)));
        }
    }
    return in_flow - reward - out_flow;
}

double fm_loss(const LogFlowSource& source, const SubsetState& s_prime, double reward) {
    const double r = fm_residual(source, s_prime, reward);
    return r * r;
}

FmLossGrad fm_loss_and_grad(const FlowModel& model, const SubsetState& s_prime, double reward) {
    const MdpSpec& spec = model.spec();
    if (s_prime.ones() == 0) throw Error(ErrorCode::RootState, "the root has no in-flow");
    const auto ps = parents(s_prime);
    const bool terminal = is_terminal(s_prime, spec);
    const auto m = static_cast<Eigen::Index>(spec.m);
    const auto np = static_cast<Eigen::Index>(ps.size());
    const Eigen::Index cols = np + (terminal ? 0 : 1);

    Eigen::MatrixXd x(m, cols);
    for (Eigen::Index j = 0; j < np; ++j) x.col(j) = encode(ps[static_cast<std::size_t>(j)].first);
    if (!terminal) x.col(np) = encode(s_prime);

    ForwardTape tape;
    const Eigen::MatrixXd lf = forward_batch(model.net(), x, &tape);

    Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(m, cols);
    double in_flow = 0.0;
    for (Eigen::Index j = 0; j < np; ++j) {
        const auto a = static_cast<Eigen::Index>(ps[static_cast<std::size_t>(j)].second.index);
        flows(a, j) = std::exp(lf(a, j));
        in_flow += flows(a, j);
    }
    double out_flow = 0.0;
    if (!terminal) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (s_prime.test(static_cast<std::size_t>(i))) continue;
            flows(i, np) = std::exp(lf(i, np));
            out_flow += flows(i, np);
        }
    }
    const double r = in_flow - reward - out_flow;

    // d(r^2)/d(log F) = +-2 r F at the slots that enter the residual.
    Eigen::MatrixXd out_grad = (2.0 * r) * flows;
    if (!terminal) out_grad.col(np) *= -1.0;

    FmLossGrad result;
    result.loss = r * r;
    result.grads = backward(model.net(), tape, out_grad);
    return result;
}

FmTrainResult train_gflow_ss(const MdpSpec& spec, const RewardFn& reward_fn, const FmTrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    FmTrainResult result{FlowModel::create(spec, cfg.network_config(spec)), {}};
    FlowModel& model = result.model;
    AdamState adam = AdamState::for_params(model.net(), cfg.eta);
    std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    result.loss_trace.reserve(cfg.episodes * spec.k);

    for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
        SubsetState s = root(spec);
        for (std::size_t t = 0; t < spec.k; ++t) {
            Action a;
            if (unit(rng) < cfg.zeta) {
                const auto legal = allowed_actions(s, spec);
                std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
                a = legal[pick(rng)];
            } else {
                a = argmax_legal(model.log_edge_flows(s), s, spec);
            }
            SubsetState next = apply_action(s, a, spec);
            const double reward = is_terminal(next, spec) ? reward_fn(next) : 0.0;
            if (!(reward >= 0.0) || !std::isfinite(reward)) {
                throw Error(ErrorCode::InvalidArgument, "reward must be finite and nonnegative");
            }
            FmLossGrad lg = fm_loss_and_grad(model, next, reward);
            adam_step(model.net(), lg.grads, adam);
            result.loss_trace.push_back(lg.loss);
            s = std::move(next);
        }
    }
    return result;
}

SubsetState sample_terminal(const LogFlowSource& source, std::mt19937_64& rng) {
    const MdpSpec& spec = source.spec();
    SubsetState s = root(spec);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (!is_terminal(s, spec)) {
        const auto policy = sampling_policy(source, s);
        double u = unit(rng);
        Action chosen = policy.back().action;
        for (const auto& wa : policy) {
            if (u < wa.weight) {
                chosen = wa.action;
                break;
            }
            u -= wa.weight;
        }
        s = apply_action(s, chosen, spec);
    }
    return s;
}

std::vector<double> terminal_distribution(const LogFlowSource& source) {
    const MdpSpec& spec = source.spec();
    std::unordered_map<SubsetState, double, SubsetStateHash> level{{root(spec), 1.0}};
    for (std::size_t t = 0; t < spec.k; ++t) {
        std::unordered_map<SubsetState, double, SubsetStateHash> next;
        for (const auto& [s, p] : level) {
            for (const auto& wa : sampling_policy(source, s)) {
                next[apply_action(s, wa.action, spec)] += p * wa.weight;
            }
        }
        level = std::move(next);
    }
    std::vector<double> out;
    for (const auto& x : enumerate_terminals(spec)) {
        auto it = level.find(x);
        out.push_back(it == level.end() ? 0.0 : it->second);
    }
    return out;
}

Trajectory rollout_rank(const LogFlowSource& source, std::size_t j) {
    const MdpSpec& spec = source.spec();
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
        // Rank in log space: exponentiated flows may saturate and fake a tie.
        const Eigen::VectorXd lf = source.log_edge_flows(s);
        std::stable_sort(legal.begin(), legal.end(), [&](Action a, Action b) {
            return lf(static_cast<Eigen::Index>(a.index)) > lf(static_cast<Eigen::Index>(b.index));
        });
        const Action a = legal[j - 1];
        tau.states.push_back(apply_action(s, a, spec));
        tau.actions.push_back(a);
    }
    return tau;
}

nlohmann::json to_json(const FlowModel& model) {
    return nlohmann::json{{"format", "gflowss-flow-model"},
                          {"version", 1},
                          {"m", model.spec().m},
                          {"k", model.spec().k},
                          {"network", to_json(model.net())}};
}

FlowModel flow_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gflowss-flow-model" || j.value("version", 0) != 1) {
        throw Error(ErrorCode::InvalidArgument, "not a version-1 flow model checkpoint");
    }
    return FlowModel(MdpSpec(j.at("m").get<std::size_t>(), j.at("k").get<std::size_t>()),
                     network_from_json(j.at("network")));
}

void save_model(const FlowModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json(model).dump() << '\n';
}

FlowModel load_flow_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return flow_model_from_json(nlohmann::json::parse(in));
}

} // namespace gflowss
