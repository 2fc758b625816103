#include "core/clip_parallel.hpp"

#include <chrono>
#include <cstring>
#include <string>

#include "core/digest.hpp"

namespace vinf {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Attribute the transport's counter movement across a stage to this layer
// kind, so metrics equal transport totals by construction.
struct StatDelta {
    const Transport& t;
    uint64_t msgs0, bytes0;
    explicit StatDelta(const Transport& tr)
        : t(tr), msgs0(tr.stats().messages_sent), bytes0(tr.stats().bytes_sent) {}
    void apply(LayerKindStats* s) const {
        if (!s) return;
        s->messages_sent += t.stats().messages_sent - msgs0;
        s->bytes_sent += t.stats().bytes_sent - bytes0;
    }
};

std::vector<uint8_t> pack_frames(const Tensor& v, const std::vector<uint32_t>& local_frames) {
    const size_t frame_bytes = v.dims().frame_elems() * sizeof(float);
    std::vector<uint8_t> out(local_frames.size() * frame_bytes);
    for (size_t i = 0; i < local_frames.size(); ++i) {
        std::memcpy(out.data() + i * frame_bytes, v.frame(local_frames[i]), frame_bytes);
    }
    return out;
}

Tensor frames_from_bytes(const std::vector<uint8_t>& bytes, uint32_t frames, const Dims& like) {
    Dims d = like;
    d.f = frames;
    if (bytes.size() != d.total() * sizeof(float)) {
        throw ProtocolError("context payload has wrong size: " + std::to_string(bytes.size()) +
                            " bytes for " + std::to_string(frames) + " frames");
    }
    std::vector<float> data(d.total());
    std::memcpy(data.data(), bytes.data(), bytes.size());
    return Tensor(d, std::move(data));
}

}  // namespace

ClipPlan make_plan(uint32_t frames, uint32_t workers) {
    if (workers == 0) throw ConfigError("worker count must be >= 1");
    if (frames == 0 || frames % workers != 0) {
        throw ConfigError("workers must divide frames evenly: frames=" + std::to_string(frames) +
                          " workers=" + std::to_string(workers));
    }
    ClipPlan plan;
    plan.n = workers;
    plan.f = frames;
    plan.f_clip = frames / workers;
    plan.ranges.reserve(workers);
    for (uint32_t i = 0; i < workers; ++i) plan.ranges.push_back({i * plan.f_clip, plan.f_clip});
    return plan;
}

std::vector<Tensor> partition(const Tensor& x, uint32_t workers, ClipPlan* plan_out) {
    ClipPlan plan = make_plan(x.dims().f, workers);
    std::vector<Tensor> clips;
    clips.reserve(workers);
    for (const FrameRange& r : plan.ranges) clips.push_back(slice_frames(x, r));
    if (plan_out) *plan_out = std::move(plan);
    return clips;
}

uint16_t layer_spec_digest(const LayerHaloSpec& spec) {
    const std::string text = "kind=" + std::to_string(uint32_t(spec.kind)) +
                             " halo=" + std::to_string(spec.halo) +
                             " global=" + std::to_string(spec.global_frames);
    return fold16(fnv1a64(text));
}

std::vector<uint32_t> global_members_in_range(uint32_t frames, uint32_t n_global, FrameRange r) {
    std::vector<uint32_t> local;
    for (uint32_t g : build_global_index_set(frames, n_global)) {
        if (g >= r.start && g < r.start + r.len) local.push_back(g - r.start);
    }
    return local;
}

TemporalContext sync_contexts(Transport& t, const ClipPlan& plan, const LayerHaloSpec& spec,
                              const Tensor& v_in, uint32_t* call_counter,
                              LayerKindStats* stats, bool ablate) {
    const uint32_t i = t.rank();
    const uint32_t n = plan.n;
    if (t.world() != n) throw TransportError("transport world does not match clip plan");
    if (v_in.dims().f != plan.f_clip) {
        throw ProtocolError("worker " + std::to_string(i) + " clip has " +
                            std::to_string(v_in.dims().f) + " frames, plan says " +
                            std::to_string(plan.f_clip));
    }
    if (spec.halo > plan.f_clip) {
        throw ConfigError("halo of " + std::to_string(spec.halo) +
                          " frames exceeds clip size " + std::to_string(plan.f_clip));
    }
    const uint16_t digest = layer_spec_digest(spec);
    if (stats) stats->calls += 1;

    TemporalContext ctx;
    const Dims& d = v_in.dims();

    // T1: all-gather the layer's global payload.
    if (spec.global_frames > 0) {
        const uint32_t call = (*call_counter)++;
        const auto t0 = std::chrono::steady_clock::now();
        if (ablate) {
            Dims gd = d;
            gd.f = spec.global_frames;
            ctx.c_global = Tensor(gd);  // zero-filled stand-in, no traffic
        } else {
            const auto members = global_members_in_range(plan.f, spec.global_frames,
                                                         plan.ranges[i]);
            std::vector<uint8_t> own = pack_frames(v_in, members);
            if (stats) stats->bytes_contributed += own.size();
            StatDelta delta(t);
            auto blocks = ring_all_gather(t, MsgType::Gather, call, digest, std::move(own));
            delta.apply(stats);
            // Blocks arrive in worker order; each worker's members are
            // ascending, so the concatenation is in global index order.
            std::vector<float> data;
            data.reserve(size_t(spec.global_frames) * d.frame_elems());
            for (const auto& b : blocks) {
                const float* p = reinterpret_cast<const float*>(b.data());
                data.insert(data.end(), p, p + b.size() / sizeof(float));
            }
            Dims gd = d;
            gd.f = spec.global_frames;
            if (data.size() != gd.total()) {
                throw ProtocolError("gathered global context has " +
                                    std::to_string(data.size()) + " values, expected " +
                                    std::to_string(gd.total()));
            }
            ctx.c_global = Tensor(gd, std::move(data));
        }
        if (stats) stats->t1_seconds += seconds_since(t0);
    }

    // T2 (even pairs) then T3 (odd pairs): swap halo frames with neighbors.
    if (spec.halo > 0 && n > 1) {
        const uint32_t call = (*call_counter)++;
        const uint32_t h = spec.halo;
        if (ablate) {
            Dims hd = d;
            hd.f = h;
            if (i > 0) ctx.c_pre = Tensor(hd);
            if (i + 1 < n) ctx.c_post = Tensor(hd);
        } else {
            for (uint32_t parity = 0; parity < 2; ++parity) {
                const auto t0 = std::chrono::steady_clock::now();
                StatDelta delta(t);
                const uint64_t tag = make_tag(call, digest, uint16_t(2 + parity));
                const bool lower = (i % 2 == parity) && (i + 1 < n);
                const bool higher = (i >= 1) && ((i - 1) % 2 == parity);
                if (lower) {
                    // Last h frames of our clip become the neighbor's c_pre.
                    std::vector<uint32_t> frames(h);
                    for (uint32_t k = 0; k < h; ++k) frames[k] = plan.f_clip - h + k;
                    auto payload = pack_frames(v_in, frames);
                    if (stats) stats->bytes_contributed += payload.size();
                    t.send(i + 1, MsgType::HaloFwd, tag, payload.data(), payload.size());
                    ctx.c_post = frames_from_bytes(
                        t.recv(i + 1, MsgType::HaloBwd, tag).payload, h, d);
                } else if (higher) {
                    ctx.c_pre = frames_from_bytes(
                        t.recv(i - 1, MsgType::HaloFwd, tag).payload, h, d);
                    std::vector<uint32_t> frames(h);
                    for (uint32_t k = 0; k < h; ++k) frames[k] = k;
                    auto payload = pack_frames(v_in, frames);
                    if (stats) stats->bytes_contributed += payload.size();
                    t.send(i - 1, MsgType::HaloBwd, tag, payload.data(), payload.size());
                }
                delta.apply(stats);
                if (stats) {
                    (parity == 0 ? stats->t2_seconds : stats->t3_seconds) += seconds_since(t0);
                }
            }
        }
    }
    return ctx;
}

Tensor conv_parallel(const ClipPlan& plan, uint32_t worker, const Tensor& v,
                     const TemporalContext& ctx, const ConvKernel& kern) {
    const uint32_t h = kern.halo();
    const bool first = worker == 0;
    const bool last = worker + 1 == plan.n;
    const uint32_t pre = ctx.c_pre.empty() ? 0 : ctx.c_pre.dims().f;
    const uint32_t post = ctx.c_post.empty() ? 0 : ctx.c_post.dims().f;
    if ((first && pre != 0) || (!first && pre != h) || (last && post != 0) ||
        (!last && post != h)) {
        throw ProtocolError("halo/kernel mismatch on worker " + std::to_string(worker) +
                            ": kernel wants " + std::to_string(h) + " frames per side, got pre=" +
                            std::to_string(pre) + " post=" + std::to_string(post));
    }
    const Tensor ext = concat_frames({&ctx.c_pre, &v, &ctx.c_post});
    return conv_over_extended(ext, pre, plan.f_clip, kern);
}

Tensor group_norm_parallel(Transport& t, const ClipPlan& plan, const Tensor& v,
                           const GroupNormParams& p, uint32_t* call_counter,
                           LayerKindStats* stats, bool ablate) {
    validate_group_norm(p, v.dims().c);
    const uint32_t n = plan.n;
    const LayerHaloSpec spec{LayerKind::GroupNorm, 0, p.groups};
    const uint16_t digest = layer_spec_digest(spec);
    if (stats) stats->calls += 1;

    auto gather_round = [&](const std::vector<double>& local) {
        const uint32_t call = (*call_counter)++;
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<uint8_t> own(local.size() * sizeof(double));
        std::memcpy(own.data(), local.data(), own.size());
        if (stats) stats->bytes_contributed += own.size();
        StatDelta delta(t);
        auto blocks = ring_all_gather(t, MsgType::Gather, call, digest, std::move(own));
        delta.apply(stats);
        if (stats) stats->t1_seconds += seconds_since(t0);
        std::vector<double> mean(p.groups, 0.0);
        for (const auto& b : blocks) {
            if (b.size() != p.groups * sizeof(double)) {
                throw ProtocolError("statistics block has wrong size");
            }
            const double* vals = reinterpret_cast<const double*>(b.data());
            for (uint32_t g = 0; g < p.groups; ++g) mean[g] += vals[g];
        }
        for (double& m : mean) m /= double(n);
        return mean;
    };

    // Round 1: clip means -> global mean. Round 2: mean squared deviation
    // from the global mean -> global variance. Equal clip sizes make the
    // plain average exact; averaging per-clip std-devs instead would not.
    std::vector<double> local_means = group_means(v, p.groups);
    if (ablate) {
        (*call_counter) += 2;
        const auto vars = group_sqdev(v, p.groups, local_means);
        return normalize_with_stats(v, p, local_means, vars);
    }
    const auto mean_bar = gather_round(local_means);
    const auto var = gather_round(group_sqdev(v, p.groups, mean_bar));
    return normalize_with_stats(v, p, mean_bar, var);
}

Tensor attention_parallel(const ClipPlan& plan, uint32_t worker, const Tensor& v,
                          const TemporalContext& ctx, double t, const AttentionParams& p,
                          const DualScopeConfig& cfg, AttnCounters* counters) {
    const Dims& d = v.dims();
    validate_attention(p, d.c);
    const uint32_t C = d.c;
    const uint32_t half = cfg.n_local / 2;
    const bool first = worker == 0;
    const bool last = worker + 1 == plan.n;
    const uint32_t pre = ctx.c_pre.empty() ? 0 : ctx.c_pre.dims().f;
    const uint32_t post = ctx.c_post.empty() ? 0 : ctx.c_post.dims().f;
    const uint32_t n_glob = ctx.c_global.empty() ? 0 : ctx.c_global.dims().f;
    if ((first && pre != 0) || (!first && pre != half) || (last && post != 0) ||
        (!last && post != half) || n_glob != cfg.n_global) {
        throw ProtocolError("context size mismatch on worker " + std::to_string(worker) +
                            ": window needs " + std::to_string(half) + " per side and " +
                            std::to_string(cfg.n_global) + " global frames, got pre=" +
                            std::to_string(pre) + " post=" + std::to_string(post) + " global=" +
                            std::to_string(n_glob));
    }

    const Tensor ext = concat_frames({&ctx.c_pre, &v, &ctx.c_post});
    const uint32_t ext_f = ext.dims().f;
    const uint32_t start = plan.ranges[worker].start;
    const uint32_t ext_start = start - pre;  // global index of ext frame 0
    const bool bias_global = t > cfg.t_star;

    // Token rows 0..ext_f-1 are ext frames; rows ext_f.. are global tokens.
    const uint32_t f_clip = plan.f_clip;
    std::vector<std::vector<uint32_t>> tokens(f_clip);
    std::vector<std::vector<uint8_t>> flags(f_clip);
    for (uint32_t a = 0; a < f_clip; ++a) {
        const auto window = build_local_window(start + a, plan.f, cfg.n_local);
        auto& tk = tokens[a];
        auto& fl = flags[a];
        tk.reserve(window.size() + cfg.n_global);
        for (uint32_t g : window) {
            if (g < ext_start || g - ext_start >= ext_f) {
                throw ProtocolError("window frame " + std::to_string(g) +
                                    " outside synchronized context of worker " +
                                    std::to_string(worker));
            }
            tk.push_back(g - ext_start);
            fl.push_back(bias_global ? 0 : 1);
        }
        for (uint32_t j = 0; j < cfg.n_global; ++j) {
            tk.push_back(ext_f + j);
            fl.push_back(bias_global ? 1 : 0);
        }
    }

    Tensor out(d);
    const uint32_t rows = ext_f + cfg.n_global;
    std::vector<float> km(size_t(rows) * C), vm(size_t(rows) * C);
    std::vector<float> qm(size_t(f_clip) * C), ctx_vec(C);
    for (uint32_t h = 0; h < d.h; ++h) {
        for (uint32_t w = 0; w < d.w; ++w) {
            for (uint32_t r = 0; r < ext_f; ++r) {
                const float* x = ext.at(r, h, w);
                project_vec(p.wk.data(), x, C, km.data() + size_t(r) * C);
                project_vec(p.wv.data(), x, C, vm.data() + size_t(r) * C);
            }
            for (uint32_t j = 0; j < cfg.n_global; ++j) {
                const float* x = ctx.c_global.at(j, h, w);
                project_vec(p.wk.data(), x, C, km.data() + size_t(ext_f + j) * C);
                project_vec(p.wv.data(), x, C, vm.data() + size_t(ext_f + j) * C);
            }
            for (uint32_t a = 0; a < f_clip; ++a) {
                project_vec(p.wq.data(), v.at(a, h, w), C, qm.data() + size_t(a) * C);
            }
            for (uint32_t a = 0; a < f_clip; ++a) {
                attend_tokens(qm.data() + size_t(a) * C, km.data(), vm.data(), tokens[a],
                              flags[a], cfg.bias, p.scale, C, ctx_vec.data());
                project_vec(p.wo.data(), ctx_vec.data(), C, out.at(a, h, w));
                if (counters) {
                    counters->score_entries += tokens[a].size();
                    counters->queries += 1;
                    if (tokens[a].size() > counters->max_tokens_per_query) {
                        counters->max_tokens_per_query = tokens[a].size();
                    }
                }
            }
        }
    }
    return out;
}

TrafficPrediction predict_sync_traffic(const ClipPlan& plan, const LayerHaloSpec& spec,
                                       uint32_t worker, uint64_t frame_bytes) {
    TrafficPrediction pred;
    if (plan.n == 1) return pred;
    if (spec.global_frames > 0) {
        // Ring: over N-1 rounds worker i forwards every block except the one
        // that originates at i+1.
        std::vector<uint64_t> block_bytes(plan.n);
        uint64_t total = 0;
        for (uint32_t w = 0; w < plan.n; ++w) {
            block_bytes[w] = global_members_in_range(plan.f, spec.global_frames,
                                                     plan.ranges[w]).size() * frame_bytes;
            total += block_bytes[w];
        }
        pred.bytes_sent += total - block_bytes[(worker + 1) % plan.n];
        pred.bytes_contributed += block_bytes[worker];
        pred.messages += plan.n - 1;
    }
    if (spec.halo > 0) {
        const uint64_t halo_bytes = uint64_t(spec.halo) * frame_bytes;
        if (worker + 1 < plan.n) {  // sends its trailing frames forward
            pred.bytes_sent += halo_bytes;
            pred.bytes_contributed += halo_bytes;
            pred.messages += 1;
        }
        if (worker > 0) {  // sends its leading frames backward
            pred.bytes_sent += halo_bytes;
            pred.bytes_contributed += halo_bytes;
            pred.messages += 1;
        }
    }
    return pred;
}

TrafficPrediction predict_groupnorm_traffic(const ClipPlan& plan, uint32_t groups,
                                            uint32_t worker) {
    (void)worker;
    TrafficPrediction pred;
    if (plan.n == 1) return pred;
    const uint64_t block = uint64_t(groups) * sizeof(double);
    pred.bytes_sent = 2 * block * (plan.n - 1);  // every round forwards N-1 equal blocks
    pred.bytes_contributed = 2 * block;
    pred.messages = 2 * (plan.n - 1);
    return pred;
}

}  // namespace vinf
