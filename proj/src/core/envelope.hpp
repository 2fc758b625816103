#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "core/error.hpp"

namespace vinf {

// Point-to-point message. The wire layout (all little-endian) is the contract
// for both backends and for the TCP protocol:
//   magic u32 'VENV' | msg_type u32 | tag u64 | src u32 | dst u32 | payload_len u64
// followed by payload_len raw bytes. Tensor payloads are f32; the group-norm
// statistics rounds carry f64 so the aggregation matches the oracle's
// double-precision accumulation.

enum class MsgType : uint32_t {
    HaloFwd = 1,   // frames flowing i -> i+1 (receiver's leading context)
    HaloBwd = 2,   // frames flowing i+1 -> i (receiver's trailing context)
    Gather = 3,    // ring all-gather blocks
    Control = 4,   // handshake / roster / results
};

constexpr uint32_t kEnvelopeMagic = 0x564E4556u;  // "VENV"
constexpr size_t kEnvelopeHeaderSize = 32;
constexpr uint32_t kProtocolVersion = 1;
// Corrupt-header guard for the socket backend.
constexpr uint64_t kMaxPayload = 1ull << 30;

struct Envelope {
    MsgType type = MsgType::Control;
    uint64_t tag = 0;
    uint32_t src = 0;
    uint32_t dst = 0;
    std::vector<uint8_t> payload;
};

// Tags order messages within a (src, dst, type) stream:
//   bits 32..63  collective call counter (strictly increasing per layer sync)
//   bits 16..31  digest of the layer spec both ends must agree on
//   bits  0..15  step inside the sync (ring round, pair stage)
uint64_t make_tag(uint32_t call, uint16_t spec_digest, uint16_t step);

std::array<uint8_t, kEnvelopeHeaderSize> encode_header(const Envelope& env);
// Parses a header; payload_len is returned for the caller to read the body.
Envelope decode_header(const uint8_t* bytes, size_t len, uint64_t* payload_len);

std::vector<uint8_t> encode_envelope(const Envelope& env);
Envelope decode_envelope(const std::vector<uint8_t>& bytes);

const char* msg_type_name(MsgType t);

}  // namespace vinf
