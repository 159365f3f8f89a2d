#include "gflowss/subset_mdp.hpp"

#include <limits>
#include <numeric>

#include "gflowss/error.hpp"

namespace gflowss {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::AlreadyActive: return "AlreadyActive";
        case ErrorCode::AtTerminal: return "AtTerminal";
        case ErrorCode::TerminalState: return "TerminalState";
        case ErrorCode::RootState: return "RootState";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::RankOutOfRange: return "RankOutOfRange";
        case ErrorCode::NonPositiveReward: return "NonPositiveReward";
        case ErrorCode::SingularSubset: return "SingularSubset";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::SingularGram: return "SingularGram";
        case ErrorCode::WrongCardinality: return "WrongCardinality";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

MdpSpec::MdpSpec(std::size_t m_, std::size_t k_) : m(m_), k(k_) { validate(); }

void MdpSpec::validate() const {
    if (m < 2 || m > kMaxSensors) {
        throw Error(ErrorCode::InvalidArgument,
                    "m must lie in [2, " + std::to_string(kMaxSensors) + "], got " + std::to_string(m));
    }
    if (k < 1 || k >= m) {
        throw Error(ErrorCode::InvalidArgument,
                    "k must lie in [1, m), got k=" + std::to_string(k) + " m=" + std::to_string(m));
    }
}

SubsetState::SubsetState(std::size_t m) : m_(m) {
    if (m > kMaxSensors) {
        throw Error(ErrorCode::InvalidArgument, "mask length exceeds kMaxSensors");
    }
}

SubsetState SubsetState::from_string(std::string_view bits) {
    SubsetState s(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') {
            s.mask_.set(i);
            ++s.ones_;
        } else if (bits[i] != '0') {
            throw Error(ErrorCode::InvalidArgument, "mask string must contain only 0/1");
        }
    }
    return s;
}

SubsetState SubsetState::from_indices(std::size_t m, const std::vector<std::size_t>& indices) {
    SubsetState s(m);
    for (std::size_t i : indices) {
        if (i >= m) {
            throw Error(ErrorCode::InvalidArgument, "index out of range");
        }
        if (s.mask_.test(i)) {
            throw Error(ErrorCode::AlreadyActive, "duplicate index " + std::to_string(i));
        }
        s.mask_.set(i);
        ++s.ones_;
    }
    return s;
}

std::vector<std::size_t> SubsetState::indices() const {
    std::vector<std::size_t> out;
    out.reserve(ones_);
    for (std::size_t i = 0; i < m_; ++i) {
        if (mask_.test(i)) out.push_back(i);
    }
    return out;
}

std::string SubsetState::to_string() const {
    std::string out(m_, '0');
    for (std::size_t i = 0; i < m_; ++i) {
        if (mask_.test(i)) out[i] = '1';
    }
    return out;
}

std::vector<double> SubsetState::as_real_vector() const {
    std::vector<double> out(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        if (mask_.test(i)) out[i] = 1.0;
    }
    return out;
}

bool operator<(const SubsetState& a, const SubsetState& b) noexcept {
    if (a.m_ != b.m_) return a.m_ < b.m_;
    for (std::size_t i = 0; i < a.m_; ++i) {
        const bool x = a.mask_.test(i);
        const bool y = b.mask_.test(i);
        if (x != y) return !x;
    }
    return false;
}

std::uint64_t stable_hash(const SubsetState& s) noexcept {
    // FNV-1a over the active indices, then a splitmix finalizer.
    std::uint64_t h = 0xcbf29ce484222325ULL ^ s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s.test(i)) continue;
        h ^= static_cast<std::uint64_t>(i) + 1;
        h *= 0x100000001b3ULL;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

SubsetState root(const MdpSpec& spec) {
    spec.validate();
    return SubsetState(spec.m);
}

SubsetState apply_action(const SubsetState& s, Action a, const MdpSpec& spec) {
    if (s.size() != spec.m || a.index >= spec.m) {
        throw Error(ErrorCode::InvalidArgument, "action index out of range");
    }
    if (s.ones() >= spec.k) {
        throw Error(ErrorCode::AtTerminal, "state already has k active sensors");
    }
    if (s.test(a.index)) {
        throw Error(ErrorCode::AlreadyActive, "sensor " + std::to_string(a.index) + " is already active");
    }
    SubsetState next = s;
    next.mask_.set(a.index);
    ++next.ones_;
    return next;
}

std::vector<Action> allowed_actions(const SubsetState& s, const MdpSpec& spec) {
    std::vector<Action> out;
    if (s.ones() >= spec.k) return out;
    out.reserve(spec.m - s.ones());
    for (std::size_t i = 0; i < spec.m; ++i) {
        if (!s.test(i)) out.push_back(Action{i});
    }
    return out;
}

std::vector<std::pair<SubsetState, Action>> parents(const SubsetState& s) {
    std::vector<std::pair<SubsetState, Action>> out;
    out.reserve(s.ones());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s.test(i)) continue;
        SubsetState p = s;
        p.mask_.reset(i);
        --p.ones_;
        out.emplace_back(std::move(p), Action{i});
    }
    return out;
}

bool is_terminal(const SubsetState& s, const MdpSpec& spec) { return s.ones() == spec.k; }

Trajectory make_trajectory(const MdpSpec& spec, const std::vector<Action>& actions) {
    Trajectory tau;
    tau.states.push_back(root(spec));
    for (Action a : actions) {
        tau.states.push_back(apply_action(tau.states.back(), a, spec));
        tau.actions.push_back(a);
    }
    validate_trajectory(spec, tau);
    return tau;
}

void validate_trajectory(const MdpSpec& spec, const Trajectory& tau) {
    if (tau.states.size() != tau.actions.size() + 1 || tau.actions.size() != spec.k) {
        throw Error(ErrorCode::InvalidArgument, "trajectory must contain exactly k transitions");
    }
    if (!(tau.states.front() == root(spec))) {
        throw Error(ErrorCode::InvalidArgument, "trajectory must start at the root");
    }
    for (std::size_t t = 0; t < tau.actions.size(); ++t) {
        if (!(apply_action(tau.states[t], tau.actions[t], spec) == tau.states[t + 1])) {
            throw Error(ErrorCode::InvalidArgument, "trajectory transition " + std::to_string(t) + " is inconsistent");
        }
    }
}

std::vector<SubsetState> enumerate_level(std::size_t m, std::size_t level) {
    std::vector<SubsetState> out;
    if (level > m) return out;
    std::vector<std::size_t> idx(level);
    for (std::size_t i = 0; i < level; ++i) idx[i] = i;
    while (true) {
        out.push_back(SubsetState::from_indices(m, idx));
        // Advance to the next combination in lexicographic order.
        std::size_t i = level;
        while (i > 0 && idx[i - 1] == m - level + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < level; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

std::vector<SubsetState> enumerate_terminals(const MdpSpec& spec) {
    spec.validate();
    return enumerate_level(spec.m, spec.k);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t r) noexcept {
    if (r > n) return 0;
    if (r > n - r) r = n - r;
    std::uint64_t acc = 1;
    for (std::uint64_t i = 1; i <= r; ++i) {
        // acc * (n - r + i) is divisible by i; split the division to stay in range.
        const std::uint64_t g = std::gcd(acc, i);
        const std::uint64_t factor = (n - r + i) / (i / g);
        std::uint64_t next = 0;
        if (__builtin_mul_overflow(acc / g, factor, &next)) return std::numeric_limits<std::uint64_t>::max();
        acc = next;
    }
    return acc;
}

} // namespace gflowss
