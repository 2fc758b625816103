#pragma once

#include <cstdint>
#include <string_view>

namespace vinf {

// FNV-1a, 64-bit. Used for the run-config handshake digest and, folded to 16
// bits, for the per-layer spec digest carried in message tags.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint16_t fold16(uint64_t h) {
    return uint16_t(h ^ (h >> 16) ^ (h >> 32) ^ (h >> 48));
}

}  // namespace vinf
