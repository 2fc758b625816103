#include <cmath>
#include <cstring>
#include <optional>
#include <vector>

#include "core/clip_parallel.hpp"
#include "core/error.hpp"
#include "core/ops.hpp"
#include "core/pipeline.hpp"
#include "core/tensor.hpp"
#include "core/transport_inproc.hpp"
#include "doctest.h"

using namespace vinf;

namespace {

ModelConfig small_model_config() {
    ModelConfig mc;
    mc.blocks = 1;
    mc.channels = 4;
    mc.taps = 3;
    mc.groups = 2;
    mc.dual_scope.n_local = 4;
    mc.dual_scope.n_global = 4;
    mc.dual_scope.bias = 5.0f;
    mc.dual_scope.t_star = 800.0;
    mc.weight_seed = 11;
    return mc;
}

}  // namespace

TEST_CASE("parameter count follows the per-block formula") {
    auto expect = [](uint32_t L, uint32_t C, uint32_t k) {
        // stub a,c (2C) + conv (kC^2 + C) + norm gamma,beta (2C) + attn (4C^2)
        return uint64_t(L) * (2 * C + uint64_t(k) * C * C + C + 2 * C + 4 * uint64_t(C) * C);
    };
    ModelConfig mc = small_model_config();
    mc.blocks = 3;
    mc.channels = 8;
    mc.taps = 5;
    CHECK(param_count(mc) == expect(3, 8, 5));
    CHECK(param_count(mc) == 1848);

    const Model m = build_model(mc);
    uint64_t actual = 0;
    for (const Block& b : m.blocks) {
        actual += b.stub_a.size() + b.stub_c.size();
        actual += b.conv.weights.size() + b.conv.bias.size();
        actual += b.norm.gamma.size() + b.norm.beta.size();
        actual += b.attn.wq.size() + b.attn.wk.size() + b.attn.wv.size() + b.attn.wo.size();
    }
    CHECK(actual == param_count(mc));
}

TEST_CASE("model weights are a pure function of the seed") {
    ModelConfig mc = small_model_config();
    const Model a = build_model(mc);
    const Model b = build_model(mc);
    REQUIRE(a.blocks.size() == b.blocks.size());
    CHECK(std::memcmp(a.blocks[0].conv.weights.data(), b.blocks[0].conv.weights.data(),
                      a.blocks[0].conv.weights.size() * sizeof(float)) == 0);
    CHECK(a.blocks[0].attn.wo == b.blocks[0].attn.wo);

    mc.weight_seed = 12;
    const Model c = build_model(mc);
    CHECK(a.blocks[0].conv.weights != c.blocks[0].conv.weights);
    CHECK(a.blocks[0].stub_a != c.blocks[0].stub_a);

    // two blocks draw from distinct streams
    mc.blocks = 2;
    const Model d = build_model(mc);
    CHECK(d.blocks[0].conv.weights != d.blocks[1].conv.weights);
}

TEST_CASE("model config validation") {
    ModelConfig mc = small_model_config();
    mc.blocks = 0;
    CHECK_THROWS_AS(build_model(mc), ConfigError);
    mc = small_model_config();
    mc.taps = 4;
    CHECK_THROWS_AS(build_model(mc), ConfigError);
    mc = small_model_config();
    mc.groups = 3;  // does not divide 4
    CHECK_THROWS_AS(build_model(mc), ConfigError);
}

TEST_CASE("timestep grid descends from 1000 to 1000/T") {
    CHECK(timestep_grid(4) == std::vector<double>{1000.0, 750.0, 500.0, 250.0});
    CHECK(timestep_grid(1) == std::vector<double>{1000.0});
    const auto g = timestep_grid(30);
    REQUIRE(g.size() == 30);
    CHECK(g.front() == 1000.0);
    CHECK(g.back() == doctest::Approx(1000.0 / 30).epsilon(1e-12));
    for (size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
    CHECK_THROWS_AS(timestep_grid(0), ConfigError);
}

TEST_CASE("bias regime counts at thirty steps") {
    // t_star = 800: t = 1000*j/30 exceeds it for j in {25..30}
    ModelConfig mc = small_model_config();
    const Model m = build_model(mc);
    const Tensor x = tensor_from_seed(Dims{4, 2, 2, 4}, 3);
    WorkerMetrics wm;
    (void)denoise_sequential(x, m, DenoiseConfig{30}, &wm);
    CHECK(wm.bias_global_steps == 6);
    CHECK(wm.bias_local_steps == 24);
}

TEST_CASE("one eps evaluation is the documented layer composition") {
    ModelConfig mc = small_model_config();
    const Model m = build_model(mc);
    const Tensor x = tensor_from_seed(Dims{4, 2, 2, 4}, 5);
    const double t = 900.0;

    Tensor u = spatial_affine_tanh(x, m.blocks[0].stub_a, m.blocks[0].stub_c);
    u = add(u, temporal_conv(u, m.blocks[0].conv));
    u = group_norm(u, m.blocks[0].norm);
    u = add(u, dual_scope_reference(u, t, m.blocks[0].attn, m.dual_scope));

    CHECK(max_abs_diff(eps_theta_sequential(x, t, m), u) == 0.0);

    // one denoising step is x - eps(x, 1000)
    Tensor want = x;
    euler_update_inplace(want, eps_theta_sequential(x, 1000.0, m), 1.0);
    CHECK(max_abs_diff(denoise_sequential(x, m, DenoiseConfig{1}), want) == 0.0);
}

TEST_CASE("halo constraints name the offending layer") {
    ModelConfig mc = small_model_config();
    CHECK_NOTHROW(check_halo_constraints(mc, 2));
    mc.taps = 5;  // conv halo 2
    CHECK_THROWS_WITH_AS(check_halo_constraints(mc, 1), doctest::Contains("(taps-1)/2"),
                         ConfigError);
    mc.taps = 3;
    mc.dual_scope.n_local = 8;  // attention halo 4
    CHECK_THROWS_WITH_AS(check_halo_constraints(mc, 2), doctest::Contains("n_local/2"),
                         ConfigError);
}

TEST_CASE("a single worker reproduces the sequential oracle bitwise") {
    ModelConfig mc = small_model_config();
    mc.blocks = 2;
    const Model m = build_model(mc);
    const Dims d{8, 2, 2, 4};
    const Tensor x = tensor_from_seed(d, 7);
    const DenoiseConfig dc{5};

    WorkerMetrics seq;
    const Tensor want = denoise_sequential(x, m, dc, &seq);

    const ClipPlan plan = make_plan(d.f, 1);
    WorkerMetrics wm;
    Tensor got;
    run_inproc_workers(1, false, [&](Transport& t) {
        got = worker_denoise(t, plan, x, m, dc, &wm);
    });
    CHECK(max_abs_diff(got, want) == 0.0);
    CHECK(wm.bias_global_steps == seq.bias_global_steps);
    CHECK(wm.bias_local_steps == seq.bias_local_steps);
    CHECK(wm.attn.queries == seq.attn.queries);
    CHECK(wm.attn.score_entries == seq.attn.score_entries);
    CHECK(wm.attn.max_tokens_per_query == seq.attn.max_tokens_per_query);
}

TEST_CASE("distributed denoising tracks the oracle across worker counts") {
    ModelConfig mc = small_model_config();
    const Model m = build_model(mc);
    const Dims d{8, 2, 2, 4};
    const Tensor x = tensor_from_seed(d, 9);
    const DenoiseConfig dc{4};
    const Tensor want = denoise_sequential(x, m, dc);

    for (uint32_t n : {2u, 4u}) {
        CAPTURE(n);
        const ClipPlan plan = make_plan(d.f, n);
        check_halo_constraints(mc, plan.f_clip);
        const auto clips = partition(x, n);
        std::vector<Tensor> outs(n);
        run_inproc_workers(n, false, [&](Transport& t) {
            outs[t.rank()] = worker_denoise(t, plan, clips[t.rank()], m, dc, nullptr);
        });
        // group-norm stats are f64 either way; any drift is far below this
        CHECK(max_abs_diff(concat_frames(outs), want) <= 1e-5);
    }
}

TEST_CASE("per-kind sync traffic scales linearly with steps") {
    ModelConfig mc = small_model_config();
    mc.blocks = 2;
    const Model m = build_model(mc);
    const Dims d{8, 2, 2, 4};
    const Tensor x = tensor_from_seed(d, 13);
    const uint32_t n = 2;
    const ClipPlan plan = make_plan(d.f, n);
    const auto clips = partition(x, n);

    auto run_steps = [&](uint32_t steps) {
        std::vector<WorkerMetrics> wms(n);
        run_inproc_workers(n, false, [&](Transport& t) {
            (void)worker_denoise(t, plan, clips[t.rank()], m, DenoiseConfig{steps},
                                 &wms[t.rank()]);
        });
        return wms;
    };
    auto at2 = run_steps(2);
    auto at4 = run_steps(4);
    for (uint32_t w = 0; w < n; ++w) {
        CAPTURE(w);
        for (auto kind : {LayerKind::Conv, LayerKind::GroupNorm, LayerKind::Attention}) {
            const auto& a = at2[w].for_kind(kind);
            const auto& b = at4[w].for_kind(kind);
            CHECK(a.calls == 2 * mc.blocks);
            CHECK(b.calls == 4 * mc.blocks);
            CHECK(b.bytes_sent == 2 * a.bytes_sent);
            CHECK(b.messages_sent == 2 * a.messages_sent);
            CHECK(a.bytes_sent > 0);
        }
    }
}

TEST_CASE("ablating one kind leaves the other syncs untouched") {
    ModelConfig mc = small_model_config();
    const Model m = build_model(mc);
    const Dims d{8, 2, 2, 4};
    const Tensor x = tensor_from_seed(d, 17);
    const uint32_t n = 2;
    const ClipPlan plan = make_plan(d.f, n);
    const auto clips = partition(x, n);
    const DenoiseConfig dc{2};

    auto run_ablate = [&](std::optional<LayerKind> ablate) {
        std::vector<WorkerMetrics> wms(n);
        std::vector<Tensor> outs(n);
        run_inproc_workers(n, false, [&](Transport& t) {
            outs[t.rank()] =
                worker_denoise(t, plan, clips[t.rank()], m, dc, &wms[t.rank()], ablate);
        });
        return std::make_pair(concat_frames(outs), wms);
    };

    const auto [full_out, full_wm] = run_ablate(std::nullopt);
    const auto [cut_out, cut_wm] = run_ablate(LayerKind::Attention);
    CHECK(cut_wm[0].attention.bytes_sent == 0);
    CHECK(cut_wm[0].attention.messages_sent == 0);
    CHECK(cut_wm[0].conv.bytes_sent == full_wm[0].conv.bytes_sent);
    CHECK(cut_wm[0].groupnorm.bytes_sent == full_wm[0].groupnorm.bytes_sent);
    // removing the sync must actually change the answer
    CHECK(max_abs_diff(cut_out, full_out) > 1e-3);
}
