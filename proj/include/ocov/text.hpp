#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ocov::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string_view trim(std::string_view s);
std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool all_digits(std::string_view s);

/// Splits on every occurrence of `sep`; empty pieces are kept.
std::vector<std::string_view> split(std::string_view s, char sep);

/// Year taken from the leftmost run of at least four digits (its first four).
std::optional<int> leading_year(std::string_view s);

/// leading_year() restricted to [min_year, max_year]; anything else is absent.
std::optional<int> plausible_year(std::string_view s, int min_year, int max_year);

/// 100 * num / den rounded half-up to two decimals ("91.68"); "0.00" when den is 0.
std::string percent2(std::uint64_t num, std::uint64_t den);

/// num / den rounded half-up to `decimals` places; "0.00"-style zero when den is 0.
std::string ratio(std::uint64_t num, std::uint64_t den, int decimals = 2);

/// 145143 -> "145,143"
std::string with_thousands(std::uint64_t n);

std::string year_or_empty(const std::optional<int>& y);

}  // namespace ocov::text
