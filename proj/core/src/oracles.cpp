#include "gflowss/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "gflowss/csv.hpp"
#include "gflowss/error.hpp"

namespace gflowss {

BruteForceResult brute_force_best(const MdpSpec& spec, const RewardFn& reward_fn, std::size_t threads) {
    spec.validate();
    if (binomial(spec.m, spec.k) > kBruteForceLimit) {
        throw Error(ErrorCode::TooLarge, "binomial(m, k) exceeds the brute-force limit");
    }
    const auto terminals = enumerate_terminals(spec);
    std::vector<double> values(terminals.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, terminals.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < terminals.size(); ++i) values[i] = reward_fn(terminals[i]);
    } else {
        const std::size_t chunk = (terminals.size() + workers - 1) / workers;
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    const std::size_t end = std::min(terminals.size(), (w + 1) * chunk);
                    for (std::size_t i = w * chunk; i < end; ++i) values[i] = reward_fn(terminals[i]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    BruteForceResult result;
    result.table.reserve(terminals.size());
    for (std::size_t i = 0; i < terminals.size(); ++i) {
        if (i == 0 || values[i] > result.value) {
            result.best = terminals[i];
            result.value = values[i];
        }
        result.table.emplace_back(terminals[i], values[i]);
    }
    return result;
}

std::vector<SubsetState> enumerate_states(const MdpSpec& spec) {
    spec.validate();
    std::uint64_t total = 0;
    for (std::size_t level = 0; level <= spec.k; ++level) {
        total += binomial(spec.m, level);
        if (total > kExactFlowLimit) throw Error(ErrorCode::TooLarge, "DAG has too many states to enumerate");
    }
    std::vector<SubsetState> out;
    out.reserve(total);
    for (std::size_t level = 0; level <= spec.k; ++level) {
        auto states = enumerate_level(spec.m, level);
        out.insert(out.end(), states.begin(), states.end());
    }
    return out;
}

double ExactFlows::edge(const SubsetState& s, Action a) const {
    const auto it = edge_flow.find(s);
    if (it == edge_flow.end() || a.index >= spec.m) return 0.0;
    return it->second(static_cast<Eigen::Index>(a.index));
}

double ExactFlows::state(const SubsetState& s) const {
    const auto it = state_flow.find(s);
    return it == state_flow.end() ? 0.0 : it->second;
}

ExactFlows exact_flow_dp(const MdpSpec& spec, const RewardFn& reward_fn) {
    const auto states = enumerate_states(spec);
    ExactFlows flows;
    flows.spec = spec;
    flows.state_flow.reserve(states.size());
    flows.edge_flow.reserve(states.size());
    const auto m = static_cast<Eigen::Index>(spec.m);

    // Levels were appended in ascending order; walk them backwards.
    for (auto it = states.rbegin(); it != states.rend(); ++it) {
        const SubsetState& s = *it;
        if (is_terminal(s, spec)) {
            const double r = reward_fn(s);
            if (!(r > 0.0) || !std::isfinite(r)) {
                throw Error(ErrorCode::NonPositiveReward, "terminal " + s.to_string() + " has a non-positive reward");
            }
            flows.state_flow.emplace(s, r);
            flows.edge_flow.emplace(s, Eigen::VectorXd::Zero(m));
            continue;
        }
        Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
        double total = 0.0;
        for (Action a : allowed_actions(s, spec)) {
            const SubsetState child = apply_action(s, a, spec);
            const double f = flows.state_flow.at(child) / static_cast<double>(child.ones());
            out(static_cast<Eigen::Index>(a.index)) = f;
            total += f;
        }
        flows.state_flow.emplace(s, total);
        flows.edge_flow.emplace(s, std::move(out));
    }
    flows.root_flow = flows.state_flow.at(root(spec));
    return flows;
}

Eigen::VectorXd TabularFlows::log_edge_flows(const SubsetState& s) const {
    const auto& spec = flows_->spec;
    if (s.size() != spec.m) throw Error(ErrorCode::DimensionMismatch, "state length differs from m");
    const auto m = static_cast<Eigen::Index>(spec.m);
    Eigen::VectorXd out = Eigen::VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
    const auto it = flows_->edge_flow.find(s);
    if (it == flows_->edge_flow.end()) return out;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (it->second(i) > 0.0) out(i) = std::log(it->second(i));
    }
    return out;
}

double flow_balance_residual(const ExactFlows& flows, const SubsetState& s, double reward) {
    const MdpSpec& spec = flows.spec;
    double in_flow = 0.0;
    if (s.ones() == 0) {
        in_flow = flows.root_flow;
    } else {
        for (const auto& [parent, a] : parents(s)) in_flow += flows.edge(parent, a);
    }
    double out_flow = 0.0;
    if (!is_terminal(s, spec)) {
        for (Action a : allowed_actions(s, spec)) out_flow += flows.edge(s, a);
    }
    const double scale = std::max({in_flow, reward + out_flow, std::numeric_limits<double>::min()});
    return std::abs(in_flow - reward - out_flow) / scale;
}

TbTerms exact_tb_terms(const ExactFlows& flows, const Trajectory& tau, double reward) {
    validate_trajectory(flows.spec, tau);
    TbTerms terms;
    terms.log_z = std::log(flows.root_flow);
    terms.log_reward = std::log(reward);
    for (std::size_t t = 0; t < tau.actions.size(); ++t) {
        const SubsetState& s = tau.states[t];
        terms.sum_log_pf += std::log(flows.edge(s, tau.actions[t]) / flows.state(s));
        terms.sum_log_pb -= std::log(static_cast<double>(tau.states[t + 1].ones()));
    }
    return terms;
}

void write_reward_table_csv(const BruteForceResult& result, std::ostream& out) {
    out << "mask,value\n";
    for (const auto& [s, v] : result.table) out << s.to_string() << ',' << format_number(v) << '\n';
}

void write_flows_csv(const ExactFlows& flows, std::ostream& out) {
    std::vector<SubsetState> states;
    states.reserve(flows.state_flow.size());
    for (const auto& [s, f] : flows.state_flow) states.push_back(s);
    std::sort(states.begin(), states.end(), [](const SubsetState& a, const SubsetState& b) {
        if (a.ones() != b.ones()) return a.ones() < b.ones();
        return a < b;
    });
    out << "mask,action,flow\n";
    for (const auto& s : states) {
        out << s.to_string() << ",," << format_number(flows.state(s)) << '\n';
        if (is_terminal(s, flows.spec)) continue;
        for (Action a : allowed_actions(s, flows.spec)) {
            out << s.to_string() << ',' << a.index << ',' << format_number(flows.edge(s, a)) << '\n';
        }
    }
}

} // namespace gflowss
