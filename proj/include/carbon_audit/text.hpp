#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string utilities shared by the plain-text parsers and writers.
namespace carbon_audit::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Splits on a single delimiter; empty fields are kept.
std::vector<std::string_view> split(std::string_view s, char delim);

// Splits on runs of ASCII whitespace; empty tokens are dropped.
std::vector<std::string_view> split_ws(std::string_view s);

// Splits text into lines, accepting LF or CRLF endings.
std::vector<std::string_view> lines(std::string_view s);

// Locale-independent parse of the whole token ('.' decimal point).
// Returns nullopt for empty input, trailing garbage, or out-of-range values.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

// Fixed 17 significant digits (printf "%.17g").
std::string format_g17(double v);

bool iequals(std::string_view a, std::string_view b);

} // namespace carbon_audit::text
