#include "core/transport.hpp"

#include <cstdio>
#include <string>

#include "core/schedule.hpp"

namespace vinf {

namespace {

std::string hex(uint64_t v) {
    char buf[19];
    snprintf(buf, sizeof(buf), "0x%llx", (unsigned long long)v);
    return buf;
}

}  // namespace

Transport::Transport(uint32_t rank, uint32_t world) : rank_(rank), world_(world) {
    if (world == 0 || rank >= world) {
        throw TransportError("endpoint rank " + std::to_string(rank) + " outside world of " +
                             std::to_string(world));
    }
}

void Transport::send(uint32_t dst, MsgType type, uint64_t tag, const uint8_t* data, size_t len) {
    if (dst == rank_) throw TransportError("invalid destination: self-send from worker " +
                                           std::to_string(rank_));
    if (dst >= world_) throw TransportError("invalid destination: worker " + std::to_string(dst) +
                                            " of " + std::to_string(world_));
    Envelope env;
    env.type = type;
    env.tag = tag;
    env.src = rank_;
    env.dst = dst;
    env.payload.assign(data, data + len);
    do_send(std::move(env));
    stats_.messages_sent += 1;
    stats_.bytes_sent += len;
}

Envelope Transport::recv(uint32_t src, MsgType type, uint64_t expected_tag) {
    if (src == rank_ || src >= world_) {
        throw TransportError("invalid source: worker " + std::to_string(src) + " of " +
                             std::to_string(world_));
    }
    Envelope env = do_recv(src);
    if (env.src != src || env.dst != rank_) {
        throw ProtocolError("misrouted message: header says " + std::to_string(env.src) + "->" +
                            std::to_string(env.dst) + ", expected " + std::to_string(src) + "->" +
                            std::to_string(rank_));
    }
    if (env.type != type) {
        throw ProtocolError(std::string("message type mismatch from worker ") +
                            std::to_string(src) + ": expected " + msg_type_name(type) + ", got " +
                            msg_type_name(env.type));
    }
    if (env.tag != expected_tag) {
        throw ProtocolError("tag mismatch from worker " + std::to_string(src) + ": expected " +
                            hex(expected_tag) + ", got " + hex(env.tag));
    }
    stats_.messages_received += 1;
    stats_.bytes_received += env.payload.size();
    return env;
}

std::vector<std::vector<uint8_t>> ring_all_gather(Transport& t, MsgType type, uint32_t call,
                                                  uint16_t spec_digest,
                                                  std::vector<uint8_t> own) {
    const uint32_t n = t.world();
    const uint32_t i = t.rank();
    std::vector<std::vector<uint8_t>> blocks(n);
    blocks[i] = std::move(own);
    if (n == 1) return blocks;

    const RingStep rs = ring_round_step(n, i);
    for (uint32_t round = 1; round < n; ++round) {
        const uint64_t tag = make_tag(call, spec_digest, uint16_t(round));
        const uint32_t out_block = (i + n - (round - 1)) % n;  // forwarded this round
        const uint32_t in_block = (i + n - round) % n;         // arrives this round
        auto do_send = [&] {
            t.send(rs.send_to, type, tag, blocks[out_block].data(), blocks[out_block].size());
        };
        auto do_recv = [&] {
            blocks[in_block] = t.recv(rs.recv_from, type, tag).payload;
        };
        if (rs.send_first) {
            do_send();
            do_recv();
        } else {
            do_recv();
            do_send();
        }
    }
    return blocks;
}

}  // namespace vinf
