#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace radsim {

// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a over the eight little-endian bytes of `seed` followed by
// `data`. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed);

}  // namespace radsim
