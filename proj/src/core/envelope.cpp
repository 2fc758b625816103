#include "core/envelope.hpp"

#include <cstring>
#include <string>

namespace vinf {

namespace {

void put_u32(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v);
    p[1] = uint8_t(v >> 8);
    p[2] = uint8_t(v >> 16);
    p[3] = uint8_t(v >> 24);
}

void put_u64(uint8_t* p, uint64_t v) {
    put_u32(p, uint32_t(v));
    put_u32(p + 4, uint32_t(v >> 32));
}

uint32_t get_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

uint64_t get_u64(const uint8_t* p) {
    return uint64_t(get_u32(p)) | uint64_t(get_u32(p + 4)) << 32;
}

}  // namespace

uint64_t make_tag(uint32_t call, uint16_t spec_digest, uint16_t step) {
    return (uint64_t(call) << 32) | (uint64_t(spec_digest) << 16) | step;
}

std::array<uint8_t, kEnvelopeHeaderSize> encode_header(const Envelope& env) {
    std::array<uint8_t, kEnvelopeHeaderSize> h{};
    put_u32(h.data() + 0, kEnvelopeMagic);
    put_u32(h.data() + 4, uint32_t(env.type));
    put_u64(h.data() + 8, env.tag);
    put_u32(h.data() + 16, env.src);
    put_u32(h.data() + 20, env.dst);
    put_u64(h.data() + 24, uint64_t(env.payload.size()));
    return h;
}

Envelope decode_header(const uint8_t* bytes, size_t len, uint64_t* payload_len) {
    if (len < kEnvelopeHeaderSize) throw ProtocolError("short envelope header");
    if (get_u32(bytes) != kEnvelopeMagic) throw ProtocolError("bad envelope magic");
    const uint32_t type = get_u32(bytes + 4);
    if (type < uint32_t(MsgType::HaloFwd) || type > uint32_t(MsgType::Control)) {
        throw ProtocolError("unknown message type " + std::to_string(type));
    }
    Envelope env;
    env.type = MsgType(type);
    env.tag = get_u64(bytes + 8);
    env.src = get_u32(bytes + 16);
    env.dst = get_u32(bytes + 20);
    const uint64_t plen = get_u64(bytes + 24);
    if (plen > kMaxPayload) throw ProtocolError("payload length implausible: " + std::to_string(plen));
    if (payload_len) *payload_len = plen;
    return env;
}

std::vector<uint8_t> encode_envelope(const Envelope& env) {
    const auto h = encode_header(env);
    std::vector<uint8_t> out(h.size() + env.payload.size());
    std::memcpy(out.data(), h.data(), h.size());
    if (!env.payload.empty()) {
        std::memcpy(out.data() + h.size(), env.payload.data(), env.payload.size());
    }
    return out;
}

Envelope decode_envelope(const std::vector<uint8_t>& bytes) {
    uint64_t plen = 0;
    Envelope env = decode_header(bytes.data(), bytes.size(), &plen);
    if (bytes.size() != kEnvelopeHeaderSize + plen) {
        throw ProtocolError("envelope length does not match payload_len");
    }
    env.payload.assign(bytes.begin() + kEnvelopeHeaderSize, bytes.end());
    return env;
}

const char* msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::HaloFwd: return "halo_fwd";
        case MsgType::HaloBwd: return "halo_bwd";
        case MsgType::Gather: return "gather";
        case MsgType::Control: return "control";
    }
    return "?";
}

}  // namespace vinf
