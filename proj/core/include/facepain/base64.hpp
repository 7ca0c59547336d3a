#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace facepain::base64 {

/// Standard alphabet, '=' padded.
std::string encode(std::span<const std::uint8_t> bytes);

/// Accepts padded and unpadded input. Throws FormatError on characters outside
/// the alphabet or on an impossible length.
std::vector<std::uint8_t> decode(std::string_view text);

}  // namespace facepain::base64
