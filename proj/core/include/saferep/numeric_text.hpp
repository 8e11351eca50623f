#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace saferep {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses a full token as a double; throws std::invalid_argument on junk.
double parse_double(std::string_view token);

std::int64_t parse_int(std::string_view token);

/// FNV-1a, used to fingerprint parameter sets in artifact headers.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace saferep
