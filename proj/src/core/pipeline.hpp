#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "core/clip_parallel.hpp"
#include "core/metrics.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"
#include "core/transport.hpp"

namespace vinf {

struct ModelConfig {
    uint32_t blocks = 1;
    uint32_t channels = 8;
    uint32_t taps = 3;
    uint32_t groups = 2;
    DualScopeConfig dual_scope;
    uint64_t weight_seed = 1;
};

struct DenoiseConfig {
    uint32_t steps = 30;  // timestep grid t_j = 1000*j/steps, j = steps..1
};

// One block: per-frame stub, then conv / norm / attention along the frame
// axis, with residual adds around conv and attention.
struct Block {
    std::vector<float> stub_a, stub_c;
    ConvKernel conv;
    GroupNormParams norm;
    AttentionParams attn;
};

struct Model {
    std::vector<Block> blocks;
    DualScopeConfig dual_scope;
};

// Deterministic weights from the seed; matrices scaled by 1/sqrt(C).
Model build_model(const ModelConfig& cfg);
uint64_t param_count(const ModelConfig& cfg);

std::vector<double> timestep_grid(uint32_t steps);  // descending, (0, 1000]

Tensor add(const Tensor& a, const Tensor& b);
void euler_update_inplace(Tensor& x, const Tensor& eps, double lambda);

// The single-process oracle. The distributed path computes the same function;
// with one worker the two are bitwise-equal by construction.
Tensor eps_theta_sequential(const Tensor& x, double t, const Model& m,
                            AttnCounters* counters = nullptr);
Tensor denoise_sequential(const Tensor& x, const Model& m, const DenoiseConfig& dc,
                          WorkerMetrics* metrics = nullptr);

// Checks halo demands against the clip size before any traffic happens.
void check_halo_constraints(const ModelConfig& cfg, uint32_t f_clip);

// SPMD worker body: one eps evaluation / the full denoising loop over this
// worker's clip. ablate skips that kind's synchronization (zero contexts).
Tensor eps_theta_worker(Transport& tr, const ClipPlan& plan, const Tensor& clip, double t,
                        const Model& m, uint32_t* call_counter, WorkerMetrics* metrics,
                        std::optional<LayerKind> ablate = std::nullopt);
Tensor worker_denoise(Transport& tr, const ClipPlan& plan, Tensor clip, const Model& m,
                      const DenoiseConfig& dc, WorkerMetrics* metrics,
                      std::optional<LayerKind> ablate = std::nullopt);

}  // namespace vinf
