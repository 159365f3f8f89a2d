#ifndef GFLOWSS_ERROR_HPP
#define GFLOWSS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace gflowss {

enum class ErrorCode {
    InvalidArgument,
    AlreadyActive,
    AtTerminal,
    TerminalState,
    RootState,
    DimensionMismatch,
    NonFiniteGradient,
    RankOutOfRange,
    NonPositiveReward,
    SingularSubset,
    SingularMatrix,
    SingularGram,
    WrongCardinality,
    TooLarge,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind of failure, not the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace gflowss

#endif // GFLOWSS_ERROR_HPP
