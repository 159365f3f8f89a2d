#ifndef GFLOWSS_ORACLES_HPP
#define GFLOWSS_ORACLES_HPP

#include <cstddef>
#include <ostream>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gflowss/flow_matching.hpp"
#include "gflowss/subset_mdp.hpp"
#include "gflowss/trajectory_balance.hpp"

namespace gflowss {

/// Largest number of subsets the brute-force oracle will enumerate.
inline constexpr std::uint64_t kBruteForceLimit = 1'000'000;
/// Largest number of DAG states the exact-flow oracle will enumerate.
inline constexpr std::uint64_t kExactFlowLimit = 1'000'000;

struct BruteForceResult {
    SubsetState best;
    double value = 0.0;
    /// Every terminal with its reward, lexicographic order.
    std::vector<std::pair<SubsetState, double>> table;
};

/// Evaluates reward_fn on every k-subset. With threads > 1 the table is
/// filled in contiguous chunks, so reward_fn must be safe to call
/// concurrently. Throws TooLarge above kBruteForceLimit subsets.
BruteForceResult brute_force_best(const MdpSpec& spec, const RewardFn& reward_fn, std::size_t threads = 1);

struct ExactFlows {
    MdpSpec spec;
    std::unordered_map<SubsetState, double, SubsetStateHash> state_flow;
    /// Per state, flow on each action slot (0 on illegal slots).
    std::unordered_map<SubsetState, Eigen::VectorXd, SubsetStateHash> edge_flow;
    double root_flow = 0.0;

    double edge(const SubsetState& s, Action a) const;
    double state(const SubsetState& s) const;
};

/// Backward pass over the graded DAG. Terminal flow is the reward and every
/// child's flow is split equally over its parents. Rewards must be positive.
ExactFlows exact_flow_dp(const MdpSpec& spec, const RewardFn& reward_fn);

/// Adapts tabulated flows to the network interface; illegal slots and
/// terminal states report -inf.
class TabularFlows final : public LogFlowSource {
public:
    explicit TabularFlows(const ExactFlows& flows) : flows_(&flows) {}

    const MdpSpec& spec() const override { return flows_->spec; }
    Eigen::VectorXd log_edge_flows(const SubsetState& s) const override;

private:
    const ExactFlows* flows_;
};

/// |in-flow - reward - out-flow| / max(in-flow, reward + out-flow) at s,
/// where the root's in-flow is taken to be its total flow.
double flow_balance_residual(const ExactFlows& flows, const SubsetState& s, double reward);

/// Trajectory-balance terms implied by exact flows: Z = root flow,
/// P^F = edge / state flow, P^B = 1 / |s'|.
TbTerms exact_tb_terms(const ExactFlows& flows, const Trajectory& tau, double reward);

/// Every DAG state with at most k ones, level by level, lexicographic in a level.
std::vector<SubsetState> enumerate_states(const MdpSpec& spec);

void write_reward_table_csv(const BruteForceResult& result, std::ostream& out);
/// Rows (mask, action, flow); a state's own flow has an empty action field.
void write_flows_csv(const ExactFlows& flows, std::ostream& out);

} // namespace gflowss

#endif // GFLOWSS_ORACLES_HPP
