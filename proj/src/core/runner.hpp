#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/metrics.hpp"
#include "core/tensor.hpp"

namespace vinf {

struct RunResult {
    Tensor x0;
    std::vector<WorkerMetrics> workers;
    double wall_seconds = 0.0;
    uint64_t violations = 0;  // validating-mode exclusivity breaches (inproc)
};

// Dispatches on cfg: sequential oracle, in-process threads, or TCP with one
// forked process per worker. Deterministic for fixed config + seeds; only the
// timing fields vary.
RunResult execute_run(const RunConfig& cfg);

// Side outputs: tensor dump at out_path, metrics records appended at
// metrics_path. Either may be empty.
void write_run_outputs(const RunConfig& cfg, const RunResult& res, const std::string& out_path,
                       const std::string& metrics_path, const std::string& label = "run");

struct BenchRow {
    std::string label;
    uint32_t workers = 1;
    double wall_seconds = 0.0;
    double speedup = 0.0;  // sequential wall / this wall
    uint64_t conv_bytes = 0;
    uint64_t groupnorm_bytes = 0;
    uint64_t attention_bytes = 0;
    double max_diff = 0.0;  // vs the sequential baseline result
    bool diverged = false;  // max_diff beyond the accumulated-rounding budget
};

// Sequential baseline first, then one row per sweep entry, then per-kind
// sync-ablation rows (n > 1 only; that is the "what breaks without it" sweep).
std::vector<BenchRow> run_bench(const RunConfig& base, const std::vector<uint32_t>& sweep,
                                const std::string& metrics_path);

std::string bench_table_text(const std::vector<BenchRow>& rows);

}  // namespace vinf
