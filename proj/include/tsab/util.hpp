/// @file util.hpp
/// Small shared helpers: SHA-256 (content addressing / fingerprints),
/// timestamp parsing and formatting, base64.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsab::util {

/// SHA-256 digest of the input, lowercase hex.
std::string sha256_hex(std::string_view data);

/// Parses "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DD" into epoch seconds (UTC).
/// Returns nullopt when the string does not match either format.
std::optional<double> parse_timestamp(std::string_view text);

/// Formats epoch seconds as "YYYY-MM-DD HH:MM:SS" (UTC). Non-integral
/// seconds are truncated toward negative infinity.
std::string format_timestamp(double epoch_seconds);

std::string base64_encode(const std::vector<std::uint8_t>& data);

}  // namespace tsab::util
