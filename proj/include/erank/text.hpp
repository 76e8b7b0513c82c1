#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace erank::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_csv(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or surrounding space.
std::string csv_escape(std::string_view field);

/// Splits on `sep`, trimming each piece and dropping empty ones.
std::vector<std::string> split_list(std::string_view s, char sep);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace erank::text
