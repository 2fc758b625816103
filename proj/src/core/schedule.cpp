#include "core/schedule.hpp"

#include <algorithm>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace vinf {

namespace {

// Color of ring edge i -> (i+1)%n. A cycle of even length is 2-colorable by
// edge parity; odd length leaves the wrap edge clashing with edge 0 at worker
// 0, so it gets a third color.
uint32_t ring_edge_color(uint32_t n, uint32_t edge) {
    if (n % 2 == 1 && edge == n - 1) return 2;
    return edge % 2;
}

}  // namespace

RingStep ring_round_step(uint32_t n, uint32_t i) {
    RingStep s;
    s.send_to = (i + 1) % n;
    s.recv_from = (i + n - 1) % n;
    const uint32_t send_color = ring_edge_color(n, i);
    const uint32_t recv_color = ring_edge_color(n, (i + n - 1) % n);
    s.send_first = send_color < recv_color;
    return s;
}

std::vector<ScheduleOp> pair_stage_ops(uint32_t n, uint32_t i, uint32_t parity) {
    std::vector<ScheduleOp> ops;
    if (i % 2 == parity % 2 && i + 1 < n) {
        ops.push_back({OpKind::Send, i + 1});
        ops.push_back({OpKind::Recv, i + 1});
    } else if (i >= 1 && (i - 1) % 2 == parity % 2) {
        ops.push_back({OpKind::Recv, i - 1});
        ops.push_back({OpKind::Send, i - 1});
    }
    return ops;
}

Schedule build_sync_schedule(uint32_t n, bool with_gather, bool with_halo) {
    if (n == 0) throw ConfigError("schedule needs at least one worker");
    Schedule s;
    s.n_workers = n;
    s.programs.resize(n);
    if (n == 1) return s;  // nothing to exchange
    for (uint32_t i = 0; i < n; ++i) {
        auto& prog = s.programs[i];
        if (with_gather) {
            const RingStep rs = ring_round_step(n, i);
            for (uint32_t round = 1; round < n; ++round) {
                if (rs.send_first) {
                    prog.push_back({OpKind::Send, rs.send_to});
                    prog.push_back({OpKind::Recv, rs.recv_from});
                } else {
                    prog.push_back({OpKind::Recv, rs.recv_from});
                    prog.push_back({OpKind::Send, rs.send_to});
                }
            }
        }
        if (with_halo) {
            for (uint32_t parity = 0; parity < 2; ++parity) {
                const auto ops = pair_stage_ops(n, i, parity);
                prog.insert(prog.end(), ops.begin(), ops.end());
            }
        }
    }
    return s;
}

Schedule build_literal_pair_schedule(uint32_t n) {
    if (n == 0) throw ConfigError("schedule needs at least one worker");
    Schedule s;
    s.n_workers = n;
    s.programs.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        auto& prog = s.programs[i];
        auto push = [&](OpKind k, int64_t peer) {
            if (peer < 0 || peer >= int64_t(n)) return;  // no such neighbor
            prog.push_back({k, uint32_t(peer)});
        };
        const int64_t lo = int64_t(i) - 1, hi = int64_t(i) + 1;
        if (i % 2 == 1) {
            push(OpKind::Recv, hi);
            push(OpKind::Send, hi);
            push(OpKind::Recv, lo);
            push(OpKind::Send, lo);
        } else {
            push(OpKind::Recv, lo);
            push(OpKind::Send, lo);
            push(OpKind::Recv, hi);
            push(OpKind::Send, hi);
        }
    }
    return s;
}

ScheduleVerdict validate_schedule(const Schedule& s, uint64_t shuffle_seed) {
    const uint32_t n = s.n_workers;
    if (s.programs.size() != n) throw ConfigError("schedule program count != worker count");
    std::vector<size_t> pc(n, 0);
    auto done = [&](uint32_t i) { return pc[i] >= s.programs[i].size(); };

    ScheduleVerdict verdict;
    SeededRng rng(shuffle_seed);

    for (;;) {
        bool all_done = true;
        for (uint32_t i = 0; i < n; ++i) {
            if (!done(i)) {
                all_done = false;
                break;
            }
        }
        if (all_done) {
            verdict.completed = true;
            return verdict;
        }

        // Enabled matches: i's next op is Send(j) and j's next op is Recv(i).
        std::vector<std::pair<uint32_t, uint32_t>> enabled;
        for (uint32_t i = 0; i < n; ++i) {
            if (done(i)) continue;
            const ScheduleOp& op = s.programs[i][pc[i]];
            if (op.kind != OpKind::Send) continue;
            const uint32_t j = op.peer;
            if (j >= n || j == i || done(j)) continue;
            const ScheduleOp& peer_op = s.programs[j][pc[j]];
            if (peer_op.kind == OpKind::Recv && peer_op.peer == i) enabled.push_back({i, j});
        }

        if (enabled.empty()) {
            // Stuck. Trace wait-for edges (both send and recv block on the
            // peer) looking for a cycle.
            std::vector<int> seen(n, -1);
            for (uint32_t start = 0; start < n; ++start) {
                if (done(start) || seen[start] >= 0) continue;
                std::vector<uint32_t> path;
                uint32_t cur = start;
                while (!done(cur) && seen[cur] < 0) {
                    seen[cur] = int(path.size());
                    path.push_back(cur);
                    cur = s.programs[cur][pc[cur]].peer;
                    if (cur >= n) break;  // dangling peer: no partner at all
                }
                if (cur < n && !done(cur) && seen[cur] >= 0 &&
                    size_t(seen[cur]) < path.size() && path[seen[cur]] == cur) {
                    verdict.cycle.assign(path.begin() + seen[cur], path.end());
                    return verdict;
                }
                // Walked into a finished worker or a previously cleared chain;
                // keep scanning other components.
            }
            return verdict;  // unmatched ops, no cycle
        }

        if (shuffle_seed != 0) {
            for (size_t i = enabled.size(); i > 1; --i) {
                std::swap(enabled[i - 1], enabled[rng.next_u64() % i]);
            }
        }

        // Fire a maximal set of endpoint-disjoint matches: one parallel round.
        std::vector<uint8_t> busy(n, 0);
        uint64_t fired = 0;
        for (const auto& [i, j] : enabled) {
            if (busy[i] || busy[j]) continue;
            busy[i] = busy[j] = 1;
            ++pc[i];
            ++pc[j];
            ++fired;
        }
        verdict.rounds += 1;
        verdict.transfers += fired;
    }
}

}  // namespace vinf
