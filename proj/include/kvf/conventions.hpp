#pragma once

// The convention sheet: the sign, normalisation and layout choices every output
// depends on. Its FNV-1a hash is embedded in each summary.json so that results
// produced under different conventions can be told apart.

#include <cstdint>
#include <string_view>

namespace kvf {

std::string_view convention_sheet();
std::string_view convention_version();
std::uint64_t fnv1a64(std::string_view text);
/// "fnv1a64:<16 hex digits>" of convention_sheet().
std::string_view convention_hash();

}  // namespace kvf
