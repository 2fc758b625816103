#pragma once

#include <cstdint>

namespace vinf {

// SplitMix64 with a fixed float mapping. Every platform must produce the exact
// same sequence for a given seed; golden tests pin values produced by an
// independent reimplementation.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Top 24 bits as a fraction in [0,1), rescaled to [-1,1). Both steps are
    // exact in binary32, so the mapping is platform-independent.
    float next_unit() {
        const uint64_t top24 = next_u64() >> 40;
        return static_cast<float>(top24) * (2.0f / 16777216.0f) - 1.0f;
    }

private:
    uint64_t state_;
};

// Derives an independent stream seed from (seed, salt); used to key
// per-block / per-parameter weight streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    SeededRng g(seed ^ (salt * 0xD1B54A32D192ED03ull));
    return g.next_u64();
}

}  // namespace vinf
