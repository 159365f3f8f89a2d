#ifndef GFLOWSS_SUBSET_MDP_HPP
#define GFLOWSS_SUBSET_MDP_HPP

#include <bitset>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gflowss {

/// Largest sensor count a SubsetState can represent.
inline constexpr std::size_t kMaxSensors = 256;

using SensorMask = std::bitset<kMaxSensors>;

/// Size parameters of the subset-construction MDP: choose k of m sensors.
struct MdpSpec {
    std::size_t m = 0;
    std::size_t k = 0;

    MdpSpec() = default;
    MdpSpec(std::size_t m_, std::size_t k_);

    /// Throws InvalidArgument unless 2 <= m <= kMaxSensors and 1 <= k < m.
    void validate() const;
};

/// Activate sensor `index`.
struct Action {
    std::size_t index = 0;

    friend bool operator==(const Action&, const Action&) = default;
    friend auto operator<=>(const Action&, const Action&) = default;
};

/// A state of the MDP: which of the m sensors are active. State identity is
/// the mask alone, so different action orders reaching the same set compare
/// equal.
class SubsetState {
public:
    SubsetState() = default;
    explicit SubsetState(std::size_t m);

    /// Builds a state from a 0/1 string, index 0 first.
    static SubsetState from_string(std::string_view bits);
    static SubsetState from_indices(std::size_t m, const std::vector<std::size_t>& indices);

    std::size_t size() const noexcept { return m_; }
    std::size_t ones() const noexcept { return ones_; }
    bool test(std::size_t i) const { return mask_.test(i); }
    const SensorMask& mask() const noexcept { return mask_; }

    /// Active indices in ascending order.
    std::vector<std::size_t> indices() const;
    /// 0/1 string of length m, index 0 first.
    std::string to_string() const;
    /// Mask as a 0/1 real vector (network input encoding).
    std::vector<double> as_real_vector() const;

    friend bool operator==(const SubsetState& a, const SubsetState& b) noexcept {
        return a.m_ == b.m_ && a.mask_ == b.mask_;
    }

    /// Lexicographic comparison on the 0/1 string (index 0 most significant).
    friend bool operator<(const SubsetState& a, const SubsetState& b) noexcept;

private:
    friend SubsetState apply_action(const SubsetState&, Action, const MdpSpec&);
    friend std::vector<std::pair<SubsetState, Action>> parents(const SubsetState&);

    SensorMask mask_;
    std::size_t m_ = 0;
    std::size_t ones_ = 0;
};

struct SubsetStateHash {
    std::size_t operator()(const SubsetState& s) const noexcept {
        return std::hash<SensorMask>{}(s.mask()) ^ (s.size() * 0x9e3779b97f4a7c15ULL);
    }
};

/// Stable 64-bit digest of a mask, independent of the standard library's
/// hash implementation. Used to derive per-subset RNG seeds.
std::uint64_t stable_hash(const SubsetState& s) noexcept;

/// Root-to-leaf path. `states` has one more entry than `actions`.
struct Trajectory {
    std::vector<SubsetState> states;
    std::vector<Action> actions;

    const SubsetState& terminal() const { return states.back(); }
};

SubsetState root(const MdpSpec& spec);

/// Throws AlreadyActive when the bit is set, AtTerminal when s already has k ones.
SubsetState apply_action(const SubsetState& s, Action a, const MdpSpec& spec);

/// Legal actions in ascending index order; empty at terminal states.
std::vector<Action> allowed_actions(const SubsetState& s, const MdpSpec& spec);

/// One (parent, action) pair per set bit, ascending by action index.
std::vector<std::pair<SubsetState, Action>> parents(const SubsetState& s);

bool is_terminal(const SubsetState& s, const MdpSpec& spec);

/// Rebuilds a trajectory from its actions; validates every transition.
Trajectory make_trajectory(const MdpSpec& spec, const std::vector<Action>& actions);

/// Checks the trajectory invariants (root start, consistent transitions,
/// terminal end). Throws InvalidArgument on violation.
void validate_trajectory(const MdpSpec& spec, const Trajectory& tau);

/// All k-subsets of {0..m-1} in lexicographic order of their index lists.
std::vector<SubsetState> enumerate_terminals(const MdpSpec& spec);

/// All states with exactly `level` active bits, lexicographic index order.
std::vector<SubsetState> enumerate_level(std::size_t m, std::size_t level);

/// Binomial coefficient; saturates at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t r) noexcept;

} // namespace gflowss

#endif // GFLOWSS_SUBSET_MDP_HPP
