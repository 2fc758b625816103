#pragma once

#include <cstdint>
#include <vector>

#include "core/metrics.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"
#include "core/transport.hpp"

namespace vinf {

// Frame-axis partition: worker i owns frames [i*f_clip, (i+1)*f_clip).
struct ClipPlan {
    uint32_t n = 1;
    uint32_t f = 0;
    uint32_t f_clip = 0;
    std::vector<FrameRange> ranges;
};

ClipPlan make_plan(uint32_t frames, uint32_t workers);
std::vector<Tensor> partition(const Tensor& x, uint32_t workers, ClipPlan* plan_out = nullptr);

// What one temporal layer needs synchronized. halo = frames per side
// ((k-1)/2 for conv, n_local/2 for attention); global_frames = attention's
// sampled token count; the group-norm form reuses the struct with
// global_frames carrying the group count so its tag digest covers it.
struct LayerHaloSpec {
    LayerKind kind = LayerKind::Conv;
    uint32_t halo = 0;
    uint32_t global_frames = 0;
};

// Folded digest of the spec; both ends of every message must agree (it rides
// in the tag), so a worker running a mismatched layer is caught on receive.
uint16_t layer_spec_digest(const LayerHaloSpec& spec);

// The synchronized triple. c_pre/c_post are empty() at the video boundary;
// c_global is the gathered attention token tensor (empty for conv).
struct TemporalContext {
    Tensor c_pre;
    Tensor c_post;
    Tensor c_global;
};

// Members of the deterministic global index set owned by range r, as local
// frame offsets paired with their global index order. Used both to build T1
// contributions and to predict traffic in closed form.
std::vector<uint32_t> global_members_in_range(uint32_t frames, uint32_t n_global, FrameRange r);

// Collective: all workers call with the same spec in the same order.
// Stage T1 all-gathers the layer's global payload (ring), T2 swaps halos in
// even pairs, T3 in odd pairs. call_counter keeps tags in lockstep and must
// advance identically on every worker (it does: this is SPMD code).
// ablate=true skips all traffic and substitutes zero-filled contexts of the
// correct shape wherever a neighbor exists (the "sync removed" mode).
TemporalContext sync_contexts(Transport& t, const ClipPlan& plan, const LayerHaloSpec& spec,
                              const Tensor& v_in, uint32_t* call_counter,
                              LayerKindStats* stats = nullptr, bool ablate = false);

// Distributed operator forms. Each equals the corresponding oracle applied to
// the full tensor, restricted to this worker's frames.
Tensor conv_parallel(const ClipPlan& plan, uint32_t worker, const Tensor& v,
                     const TemporalContext& ctx, const ConvKernel& kern);

Tensor group_norm_parallel(Transport& t, const ClipPlan& plan, const Tensor& v,
                           const GroupNormParams& p, uint32_t* call_counter,
                           LayerKindStats* stats = nullptr, bool ablate = false);

Tensor attention_parallel(const ClipPlan& plan, uint32_t worker, const Tensor& v,
                          const TemporalContext& ctx, double t, const AttentionParams& p,
                          const DualScopeConfig& cfg, AttnCounters* counters = nullptr);

// Exact per-worker predictions for one sync_contexts / group_norm_parallel
// call; the measured counters must match these to the byte.
struct TrafficPrediction {
    uint64_t bytes_sent = 0;
    uint64_t bytes_contributed = 0;
    uint64_t messages = 0;
};
TrafficPrediction predict_sync_traffic(const ClipPlan& plan, const LayerHaloSpec& spec,
                                       uint32_t worker, uint64_t frame_bytes);
TrafficPrediction predict_groupnorm_traffic(const ClipPlan& plan, uint32_t groups,
                                            uint32_t worker);

}  // namespace vinf
