#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace imit {

// FNV-1a 64-bit content hash, used for checkpoint/array integrity checks and
// run manifests. Not cryptographic; collision resistance is not a goal.
inline std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    for (const std::byte b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(std::span(static_cast<const std::byte*>(data), n), h);
}

std::string hex64(std::uint64_t v);
std::uint64_t hash_file(const std::string& path);

}  // namespace imit
