#pragma once

#include <cstdint>
#include <vector>

namespace vinf {

// Offline model of one layer's synchronization round: each worker runs a
// straight-line program of blocking sends/recvs. The same builders drive the
// live transports, so validating a schedule validates what actually runs.

enum class OpKind : uint8_t { Send, Recv };

struct ScheduleOp {
    OpKind kind;
    uint32_t peer;
};

struct Schedule {
    uint32_t n_workers = 0;
    std::vector<std::vector<ScheduleOp>> programs;
};

// One ring round: worker i forwards to (i+1)%n and receives from (i-1+n)%n.
// Edges are phase-colored so no worker is in two transfers at once; a cycle
// of odd length needs a third phase. send_first says which of the two ops the
// worker issues first (the lower-colored edge goes first).
struct RingStep {
    uint32_t send_to = 0;
    uint32_t recv_from = 0;
    bool send_first = false;
};
RingStep ring_round_step(uint32_t n, uint32_t i);

// Halo swap within pairs (p, p+1) where p % 2 == parity: the lower index
// sends then receives, the higher receives then sends. Workers without a
// partner in this stage get an empty program.
std::vector<ScheduleOp> pair_stage_ops(uint32_t n, uint32_t i, uint32_t parity);

// The shipped per-layer schedule: optional all-gather rounds, then the two
// pair stages.
Schedule build_sync_schedule(uint32_t n, bool with_gather, bool with_halo);

// The published pseudocode's literal pair-exchange order (both branches issue
// recv first). Deadlocks under rendezvous semantics; kept as a regression.
Schedule build_literal_pair_schedule(uint32_t n);

struct ScheduleVerdict {
    bool completed = false;
    uint32_t rounds = 0;      // parallel exchange steps
    uint64_t transfers = 0;   // matched send/recv pairs
    std::vector<uint32_t> cycle;  // wait-for cycle when deadlocked (may be
                                  // empty if an op simply has no partner)
};

// Simulates the schedule under strict rendezvous + one-transfer-per-worker.
// shuffle_seed permutes the match order inside a round; the verdict must not
// depend on it (matching is confluent), which tests assert.
ScheduleVerdict validate_schedule(const Schedule& s, uint64_t shuffle_seed = 0);

}  // namespace vinf
