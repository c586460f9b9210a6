#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ctprep::gzip {

bool is_gzip(std::span<const std::uint8_t> bytes);

/// Throws Error(MalformedHeader) on a corrupt or truncated stream.
std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> bytes);

/// Header mtime is zero, so output is a pure function of the input.
std::vector<std::uint8_t> compress(std::span<const std::uint8_t> bytes);

}  // namespace ctprep::gzip
