#include "core/metrics.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "core/error.hpp"

namespace vinf {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::GroupNorm: return "groupnorm";
        case LayerKind::Attention: return "attention";
    }
    return "?";
}

LayerKindStats& WorkerMetrics::for_kind(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return conv;
        case LayerKind::GroupNorm: return groupnorm;
        default: return attention;
    }
}

uint64_t WorkerMetrics::total_bytes_sent() const {
    return conv.bytes_sent + groupnorm.bytes_sent + attention.bytes_sent;
}

uint64_t WorkerMetrics::total_messages_sent() const {
    return conv.messages_sent + groupnorm.messages_sent + attention.messages_sent;
}

namespace {

void append_kind(std::string& out, uint32_t worker, LayerKind kind, const LayerKindStats& s) {
    char buf[512];
    snprintf(buf, sizeof(buf),
             "sync worker=%u kind=%s calls=%llu msgs=%llu bytes_sent=%llu "
             "bytes_contributed=%llu t1_s=%.6f t2_s=%.6f t3_s=%.6f\n",
             worker, layer_kind_name(kind), (unsigned long long)s.calls,
             (unsigned long long)s.messages_sent, (unsigned long long)s.bytes_sent,
             (unsigned long long)s.bytes_contributed, s.t1_seconds, s.t2_seconds, s.t3_seconds);
    out += buf;
}

}  // namespace

std::string metrics_records_text(const RunRecordInfo& info,
                                 const std::vector<WorkerMetrics>& workers) {
    std::string out;
    char buf[512];
    snprintf(buf, sizeof(buf),
             "run digest=0x%016llx workers=%u transport=%s label=%s steps=%u wall_s=%.6f\n",
             (unsigned long long)info.digest, info.workers, info.transport.c_str(),
             info.label.c_str(), info.steps, info.wall_seconds);
    out += buf;
    for (uint32_t i = 0; i < workers.size(); ++i) {
        const WorkerMetrics& m = workers[i];
        append_kind(out, i, LayerKind::Conv, m.conv);
        append_kind(out, i, LayerKind::GroupNorm, m.groupnorm);
        append_kind(out, i, LayerKind::Attention, m.attention);
        snprintf(buf, sizeof(buf),
                 "worker id=%u peak_live=%lld score_entries=%llu queries=%llu max_tokens=%llu "
                 "bias_global=%llu bias_local=%llu wall_s=%.6f\n",
                 i, (long long)m.peak_live_elems, (unsigned long long)m.attn.score_entries,
                 (unsigned long long)m.attn.queries,
                 (unsigned long long)m.attn.max_tokens_per_query,
                 (unsigned long long)m.bias_global_steps, (unsigned long long)m.bias_local_steps,
                 m.wall_seconds);
        out += buf;
    }
    return out;
}

void append_metrics_records(const std::string& path, const RunRecordInfo& info,
                            const std::vector<WorkerMetrics>& workers) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open metrics file: " + path);
    out << metrics_records_text(info, workers);
    if (!out) throw IoError("metrics write failed: " + path);
}

static_assert(std::is_trivially_copyable_v<WorkerMetrics>);

std::vector<uint8_t> worker_metrics_to_bytes(const WorkerMetrics& m) {
    std::vector<uint8_t> out(sizeof(WorkerMetrics));
    std::memcpy(out.data(), &m, sizeof(WorkerMetrics));
    return out;
}

WorkerMetrics worker_metrics_from_bytes(const uint8_t* data, size_t len) {
    if (len != sizeof(WorkerMetrics)) {
        throw ProtocolError("metrics payload size mismatch: expected " +
                            std::to_string(sizeof(WorkerMetrics)) + " bytes, got " +
                            std::to_string(len));
    }
    WorkerMetrics m;
    std::memcpy(&m, data, sizeof(WorkerMetrics));
    return m;
}

}  // namespace vinf
