#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/ops.hpp"

namespace vinf {

enum class LayerKind : uint32_t { Conv = 1, GroupNorm = 2, Attention = 3 };

const char* layer_kind_name(LayerKind k);

// Per-worker, per-layer-kind synchronization accounting. Byte counters are
// payload bytes and must equal the transport's own counters exactly;
// bytes_contributed is the worker's own injected data (halo frames it owns,
// its all-gather block), as opposed to ring traffic forwarded for others.
struct LayerKindStats {
    uint64_t calls = 0;
    uint64_t messages_sent = 0;
    uint64_t bytes_sent = 0;
    uint64_t bytes_contributed = 0;
    double t1_seconds = 0.0;
    double t2_seconds = 0.0;
    double t3_seconds = 0.0;
};

struct WorkerMetrics {
    LayerKindStats conv;
    LayerKindStats groupnorm;
    LayerKindStats attention;
    AttnCounters attn;
    uint64_t bias_global_steps = 0;  // denoise steps with t > t_star
    uint64_t bias_local_steps = 0;
    int64_t peak_live_elems = 0;
    double wall_seconds = 0.0;

    LayerKindStats& for_kind(LayerKind k);
    uint64_t total_bytes_sent() const;
    uint64_t total_messages_sent() const;
};

struct RunRecordInfo {
    uint64_t digest = 0;
    uint32_t workers = 1;
    std::string transport;
    std::string label;  // "run", "bench n=4", "bench n=4 -attention-sync", ...
    uint32_t steps = 0;
    double wall_seconds = 0.0;
};

// Line-delimited records, one per event; timing fields are the only ones that
// vary between identical runs.
std::string metrics_records_text(const RunRecordInfo& info,
                                 const std::vector<WorkerMetrics>& workers);
void append_metrics_records(const std::string& path, const RunRecordInfo& info,
                            const std::vector<WorkerMetrics>& workers);

// Wire form for returning metrics from forked workers. Both ends are the
// same binary, so the raw struct layout is the format.
std::vector<uint8_t> worker_metrics_to_bytes(const WorkerMetrics& m);
WorkerMetrics worker_metrics_from_bytes(const uint8_t* data, size_t len);

}  // namespace vinf
