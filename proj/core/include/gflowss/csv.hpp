#ifndef GFLOWSS_CSV_HPP
#define GFLOWSS_CSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace gflowss {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

std::string csv_line(const std::vector<std::string>& fields);

/// Splits one CSV line, honoring double-quoted fields.
std::vector<std::string> parse_csv_line(std::string_view line);

} // namespace gflowss

#endif // GFLOWSS_CSV_HPP
