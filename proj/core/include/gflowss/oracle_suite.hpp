#ifndef GFLOWSS_ORACLE_SUITE_HPP
#define GFLOWSS_ORACLE_SUITE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gflowss {

enum class Comparison { Less, LessEqual, GreaterEqual };

struct OracleCheck {
    std::string name;
    double measured = 0.0;
    Comparison comparison = Comparison::Less;
    double threshold = 0.0;
    bool passed = false;
};

struct OracleSuiteOptions {
    std::uint64_t seed = 2024;
    /// Proportional-sampling rollouts on the m=4, k=2 exact flows.
    std::size_t sampling_rollouts = 1'000'000;
    /// Scales one edge of the flow-balance check's exact flows by 1.5.
    bool corrupt_flow = false;
};

/// Number of rows run_oracle_suite reports.
inline constexpr std::size_t kOracleCheckCount = 17;

/// Exact-oracle comparisons and property checks. Failures are entries in the
/// report, never exceptions.
std::vector<OracleCheck> run_oracle_suite(const OracleSuiteOptions& options = {});

bool all_passed(const std::vector<OracleCheck>& report);

/// check,measured,comparison,threshold,status
void write_oracle_report(const std::vector<OracleCheck>& report, std::ostream& out);

} // namespace gflowss

#endif // GFLOWSS_ORACLE_SUITE_HPP
