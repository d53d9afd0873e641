#pragma once

// Small text utilities shared by the CSV readers/writers, the generator and
// the CLI: timestamps, shortest round-trip number formatting, CSV fields.

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace elqa {

using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (a trailing `+00:00` is accepted in place of
/// `Z`). Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp ts);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict full-field parse; rejects trailing garbage, NaN and infinities.
std::optional<double> parse_double(std::string_view text);
std::optional<unsigned long long> parse_unsigned(std::string_view text);

/// Splits one CSV record. Double-quoted fields may contain commas and `""`.
/// Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv_record(std::string_view line);

/// Quotes the field if it contains a comma, quote or newline.
std::string csv_field(std::string_view field);

std::string join_csv_record(const std::vector<std::string>& fields);

/// RFC 3986 percent-encoding; unreserved characters pass through.
std::string percent_encode(std::string_view text);

}  // namespace elqa
