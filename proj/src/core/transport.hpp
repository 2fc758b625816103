#pragma once

#include <cstdint>
#include <vector>

#include "core/envelope.hpp"

namespace vinf {

struct TransportStats {
    uint64_t messages_sent = 0;
    uint64_t bytes_sent = 0;  // payload bytes only; headers are bookkeeping
    uint64_t messages_received = 0;
    uint64_t bytes_received = 0;
};

// One endpoint per worker, used only by its owning worker. Backends provide
// blocking point-to-point delivery with per-pair FIFO order; the base class
// owns validation and accounting so both backends behave identically.
class Transport {
public:
    virtual ~Transport() = default;

    uint32_t rank() const { return rank_; }
    uint32_t world() const { return world_; }

    void send(uint32_t dst, MsgType type, uint64_t tag, const uint8_t* data, size_t len);
    // Blocks for the next message from src; the envelope must carry exactly
    // this type and tag (tag mismatch = the SPMD contract broke).
    Envelope recv(uint32_t src, MsgType type, uint64_t expected_tag);

    const TransportStats& stats() const { return stats_; }

protected:
    Transport(uint32_t rank, uint32_t world);
    virtual void do_send(Envelope&& env) = 0;
    virtual Envelope do_recv(uint32_t src) = 0;

private:
    uint32_t rank_;
    uint32_t world_;
    TransportStats stats_;
};

// Ring all-gather: N-1 rounds of forwarding to (rank+1)%N, receiving from
// (rank-1+N)%N, rounds phase-split per ring_round_step. Returns all N
// payloads in worker order; payload sizes may differ (each hop's envelope
// carries its own length). `call` feeds the tag's collective counter; `step`
// inside the tag is the round number.
std::vector<std::vector<uint8_t>> ring_all_gather(Transport& t, MsgType type, uint32_t call,
                                                  uint16_t spec_digest,
                                                  std::vector<uint8_t> own);

}  // namespace vinf
