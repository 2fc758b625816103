#include "core/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "core/rng.hpp"

namespace vinf {

namespace {

// Salt layout for per-parameter weight streams; block b uses b*16 + slot.
enum ParamSlot : uint64_t {
    kStub = 0,
    kConvW = 1,
    kConvB = 2,
    kGamma = 3,
    kBeta = 4,
    kWq = 5,
    kWk = 6,
    kWv = 7,
    kWo = 8,
};

std::vector<float> draw(uint64_t seed, size_t count, float scale) {
    SeededRng rng(seed);
    std::vector<float> v(count);
    for (float& x : v) x = rng.next_unit() * scale;
    return v;
}

}  // namespace

Model build_model(const ModelConfig& cfg) {
    if (cfg.blocks == 0) throw ConfigError("model needs at least one block");
    if (cfg.taps == 0 || cfg.taps % 2 == 0) throw ConfigError("conv taps must be odd");
    if (cfg.groups == 0 || cfg.channels % cfg.groups != 0) {
        throw ConfigError("norm groups must divide channels");
    }
    const uint32_t C = cfg.channels;
    const float mat_scale = 1.0f / std::sqrt(float(C));
    Model m;
    m.dual_scope = cfg.dual_scope;
    m.blocks.reserve(cfg.blocks);
    for (uint32_t b = 0; b < cfg.blocks; ++b) {
        auto salt = [&](ParamSlot slot) { return mix_seed(cfg.weight_seed, b * 16 + slot); };
        Block blk;
        auto [a, c] = spatial_stub_coeffs(C, salt(kStub));
        blk.stub_a = std::move(a);
        blk.stub_c = std::move(c);
        blk.conv.taps = cfg.taps;
        blk.conv.weights = draw(salt(kConvW), size_t(cfg.taps) * C * C, mat_scale);
        blk.conv.bias = draw(salt(kConvB), C, 1.0f);
        blk.norm.groups = cfg.groups;
        blk.norm.gamma = draw(salt(kGamma), C, 1.0f);
        blk.norm.beta = draw(salt(kBeta), C, 1.0f);
        blk.attn.dim = C;
        blk.attn.scale = 1.0f / std::sqrt(float(C));
        blk.attn.wq = draw(salt(kWq), size_t(C) * C, mat_scale);
        blk.attn.wk = draw(salt(kWk), size_t(C) * C, mat_scale);
        blk.attn.wv = draw(salt(kWv), size_t(C) * C, mat_scale);
        blk.attn.wo = draw(salt(kWo), size_t(C) * C, mat_scale);
        m.blocks.push_back(std::move(blk));
    }
    return m;
}

uint64_t param_count(const ModelConfig& cfg) {
    const uint64_t C = cfg.channels;
    return uint64_t(cfg.blocks) *
           (2 * C + uint64_t(cfg.taps) * C * C + C + 2 * C + 4 * C * C);
}

std::vector<double> timestep_grid(uint32_t steps) {
    if (steps == 0) throw ConfigError("denoising needs at least one step");
    std::vector<double> grid;
    grid.reserve(steps);
    for (uint32_t j = steps; j >= 1; --j) grid.push_back(1000.0 * j / steps);
    return grid;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!(a.dims() == b.dims())) throw ShapeError("add: shape mismatch");
    Tensor out(a.dims());
    const float* pa = a.data();
    const float* pb = b.data();
    float* o = out.data();
    for (size_t i = 0; i < a.size(); ++i) o[i] = pa[i] + pb[i];
    return out;
}

void euler_update_inplace(Tensor& x, const Tensor& eps, double lambda) {
    if (!(x.dims() == eps.dims())) throw ShapeError("update: shape mismatch");
    float* px = x.data();
    const float* pe = eps.data();
    for (size_t i = 0; i < x.size(); ++i) {
        px[i] = float(double(px[i]) - lambda * double(pe[i]));
    }
}

Tensor eps_theta_sequential(const Tensor& x, double t, const Model& m, AttnCounters* counters) {
    Tensor u = x;
    for (const Block& b : m.blocks) {
        u = spatial_affine_tanh(u, b.stub_a, b.stub_c);
        u = add(u, temporal_conv(u, b.conv));
        u = group_norm(u, b.norm);
        u = add(u, dual_scope_reference(u, t, b.attn, m.dual_scope, counters));
    }
    return u;
}

Tensor denoise_sequential(const Tensor& x, const Model& m, const DenoiseConfig& dc,
                          WorkerMetrics* metrics) {
    const auto t0 = std::chrono::steady_clock::now();
    Tensor cur = x;
    for (double t : timestep_grid(dc.steps)) {
        Tensor eps = eps_theta_sequential(cur, t, m, metrics ? &metrics->attn : nullptr);
        euler_update_inplace(cur, eps, 1.0 / dc.steps);
        if (metrics) {
            (t > m.dual_scope.t_star ? metrics->bias_global_steps : metrics->bias_local_steps) += 1;
        }
    }
    if (metrics) {
        metrics->wall_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return cur;
}

void check_halo_constraints(const ModelConfig& cfg, uint32_t f_clip) {
    const uint32_t conv_halo = (cfg.taps - 1) / 2;
    if (conv_halo > f_clip) {
        throw ConfigError("conv halo exceeds clip: (taps-1)/2 = " + std::to_string(conv_halo) +
                          " > frames/workers = " + std::to_string(f_clip));
    }
    const uint32_t attn_halo = cfg.dual_scope.n_local / 2;
    if (attn_halo > f_clip) {
        throw ConfigError("attention halo exceeds clip: n_local/2 = " +
                          std::to_string(attn_halo) + " > frames/workers = " +
                          std::to_string(f_clip));
    }
}

Tensor eps_theta_worker(Transport& tr, const ClipPlan& plan, const Tensor& clip, double t,
                        const Model& m, uint32_t* call_counter, WorkerMetrics* metrics,
                        std::optional<LayerKind> ablate) {
    const uint32_t rank = tr.rank();
    Tensor u = clip;
    for (const Block& b : m.blocks) {
        u = spatial_affine_tanh(u, b.stub_a, b.stub_c);

        const LayerHaloSpec conv_spec{LayerKind::Conv, b.conv.halo(), 0};
        TemporalContext cctx = sync_contexts(tr, plan, conv_spec, u, call_counter,
                                             metrics ? &metrics->conv : nullptr,
                                             ablate == LayerKind::Conv);
        u = add(u, conv_parallel(plan, rank, u, cctx, b.conv));

        u = group_norm_parallel(tr, plan, u, b.norm, call_counter,
                                metrics ? &metrics->groupnorm : nullptr,
                                ablate == LayerKind::GroupNorm);

        const LayerHaloSpec attn_spec{LayerKind::Attention, m.dual_scope.n_local / 2,
                                      m.dual_scope.n_global};
        TemporalContext actx = sync_contexts(tr, plan, attn_spec, u, call_counter,
                                             metrics ? &metrics->attention : nullptr,
                                             ablate == LayerKind::Attention);
        u = add(u, attention_parallel(plan, rank, u, actx, t, b.attn, m.dual_scope,
                                      metrics ? &metrics->attn : nullptr));
    }
    return u;
}

Tensor worker_denoise(Transport& tr, const ClipPlan& plan, Tensor clip, const Model& m,
                      const DenoiseConfig& dc, WorkerMetrics* metrics,
                      std::optional<LayerKind> ablate) {
    const auto t0 = std::chrono::steady_clock::now();
    uint32_t call_counter = 1;
    for (double t : timestep_grid(dc.steps)) {
        Tensor eps = eps_theta_worker(tr, plan, clip, t, m, &call_counter, metrics, ablate);
        euler_update_inplace(clip, eps, 1.0 / dc.steps);
        if (metrics) {
            (t > m.dual_scope.t_star ? metrics->bias_global_steps : metrics->bias_local_steps) += 1;
        }
    }
    if (metrics) {
        metrics->wall_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return clip;
}

}  // namespace vinf
