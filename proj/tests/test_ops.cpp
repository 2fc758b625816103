#include <cmath>
#include <cstring>
#include <vector>

#include "core/error.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "doctest.h"

using namespace vinf;

namespace {

// Deterministic parameter soup for oracle comparisons.
ConvKernel make_kernel(uint32_t taps, uint32_t channels, uint64_t seed, float bias_scale = 1.0f) {
    SeededRng rng(seed);
    ConvKernel k;
    k.taps = taps;
    k.weights.resize(size_t(taps) * channels * channels);
    k.bias.resize(channels);
    for (float& w : k.weights) w = rng.next_unit();
    for (float& b : k.bias) b = bias_scale * rng.next_unit();
    return k;
}

AttentionParams make_attention(uint32_t channels, uint64_t seed) {
    SeededRng rng(seed);
    AttentionParams p;
    p.dim = channels;
    const float s = 1.0f / std::sqrt(float(channels));
    auto fill = [&](std::vector<float>& m) {
        m.resize(size_t(channels) * channels);
        for (float& w : m) w = s * rng.next_unit();
    };
    fill(p.wq);
    fill(p.wk);
    fill(p.wv);
    fill(p.wo);
    p.scale = s;
    return p;
}

GroupNormParams make_norm(uint32_t groups, uint32_t channels, uint64_t seed) {
    SeededRng rng(seed);
    GroupNormParams p;
    p.groups = groups;
    p.gamma.resize(channels);
    p.beta.resize(channels);
    for (float& g : p.gamma) g = 1.0f + 0.25f * rng.next_unit();
    for (float& b : p.beta) b = 0.25f * rng.next_unit();
    return p;
}

// Brute-force temporal conv, written index-by-index from the definition.
Tensor conv_oracle(const Tensor& v, const ConvKernel& k) {
    const Dims& d = v.dims();
    const int halo = int((k.taps - 1) / 2);
    const uint32_t C = d.c;
    Tensor out(d);
    for (uint32_t f = 0; f < d.f; ++f) {
        for (uint32_t h = 0; h < d.h; ++h) {
            for (uint32_t w = 0; w < d.w; ++w) {
                for (uint32_t oc = 0; oc < C; ++oc) {
                    double acc = k.bias[oc];
                    for (int j = -halo; j <= halo; ++j) {
                        const int64_t sf = int64_t(f) + j;
                        if (sf < 0 || sf >= int64_t(d.f)) continue;
                        for (uint32_t ic = 0; ic < C; ++ic) {
                            const double wgt =
                                k.weights[(size_t(j + halo) * C + oc) * C + ic];
                            acc += wgt * double(v.at(uint32_t(sf), h, w)[ic]);
                        }
                    }
                    out.at(f, h, w)[oc] = float(acc);
                }
            }
        }
    }
    return out;
}

// Brute-force dual-scope attention from the definition: per query, softmax
// over window-then-global tokens with the +bias on whichever set t selects.
Tensor dual_scope_oracle(const Tensor& v, double t, const AttentionParams& p,
                         const DualScopeConfig& cfg) {
    const Dims& d = v.dims();
    const uint32_t F = d.f;
    const uint32_t C = d.c;
    const auto global_set = build_global_index_set(F, cfg.n_global);
    const bool bias_global = t > cfg.t_star;
    Tensor out(d);
    auto project = [&](const std::vector<float>& w, const float* x, std::vector<double>& y) {
        y.assign(C, 0.0);
        for (uint32_t o = 0; o < C; ++o)
            for (uint32_t i = 0; i < C; ++i) y[o] += double(w[size_t(o) * C + i]) * double(x[i]);
    };
    std::vector<double> q, k, val;
    for (uint32_t h = 0; h < d.h; ++h) {
        for (uint32_t w = 0; w < d.w; ++w) {
            for (uint32_t a = 0; a < F; ++a) {
                project(p.wq, v.at(a, h, w), q);
                std::vector<uint32_t> toks = build_local_window(a, F, cfg.n_local);
                const size_t n_window = toks.size();
                toks.insert(toks.end(), global_set.begin(), global_set.end());
                std::vector<double> logits(toks.size());
                for (size_t i = 0; i < toks.size(); ++i) {
                    project(p.wk, v.at(toks[i], h, w), k);
                    double dot = 0.0;
                    for (uint32_t c = 0; c < C; ++c) {
                        // q fed through f32 to mirror the runtime's storage
                        dot += double(float(q[c])) * double(float(k[c]));
                    }
                    logits[i] = double(p.scale) * dot;
                    const bool is_global = i >= n_window;
                    if (bias_global == is_global) logits[i] += double(cfg.bias);
                }
                double mx = logits[0];
                for (double l : logits) mx = std::max(mx, l);
                double denom = 0.0;
                for (double& l : logits) {
                    l = std::exp(l - mx);
                    denom += l;
                }
                std::vector<double> ctx(C, 0.0);
                for (size_t i = 0; i < toks.size(); ++i) {
                    project(p.wv, v.at(toks[i], h, w), val);
                    for (uint32_t c = 0; c < C; ++c)
                        ctx[c] += logits[i] / denom * double(float(val[c]));
                }
                std::vector<float> ctxf(C);
                for (uint32_t c = 0; c < C; ++c) ctxf[c] = float(ctx[c]);
                std::vector<double> o;
                project(p.wo, ctxf.data(), o);
                for (uint32_t c = 0; c < C; ++c) out.at(a, h, w)[c] = float(o[c]);
            }
        }
    }
    return out;
}

}  // namespace

// --- spatial stub ------------------------------------------------------------

TEST_CASE("spatial stub is per-frame affine tanh") {
    const Dims d{3, 2, 2, 4};
    const Tensor v = tensor_from_seed(d, 11);
    auto [a, c] = spatial_stub_coeffs(4, 99);
    const Tensor out = spatial_affine_tanh(v, a, c);
    for (size_t i = 0; i < v.size(); ++i) {
        const uint32_t ch = uint32_t(i % 4);
        CHECK(out.data()[i] == doctest::Approx(std::tanh(a[ch] * v.data()[i] + c[ch])).epsilon(1e-6));
    }
    CHECK(max_abs_diff(spatial_stub(v, 99), out) == 0.0);

    // no cross-frame flow: editing frame 0 leaves frame 1 output untouched
    Tensor v2 = v;
    v2.at(0, 0, 0)[0] += 1.0f;
    const Tensor out2 = spatial_stub(v2, 99);
    CHECK(std::memcmp(out.frame(1), out2.frame(1), d.frame_elems() * 2 * sizeof(float)) == 0);
    CHECK(out2.at(0, 0, 0)[0] != out.at(0, 0, 0)[0]);
}

// --- temporal conv -----------------------------------------------------------

TEST_CASE("temporal conv matches the brute-force oracle") {
    for (uint32_t taps : {1u, 3u, 5u}) {
        const Dims d{7, 2, 3, 4};
        const Tensor v = tensor_from_seed(d, 21);
        const ConvKernel k = make_kernel(taps, d.c, 31 + taps);
        const Tensor got = temporal_conv(v, k);
        const Tensor want = conv_oracle(v, k);
        CAPTURE(taps);
        CHECK(max_abs_diff(got, want) <= 1e-6);
    }
}

TEST_CASE("conv boundary uses zero padding: 2/3 mass on constant input") {
    // k=3, all weights equal, bias 0, constant input: interior output sums
    // three taps, the two edge frames only two -> exactly 2/3 of interior.
    const Dims d{5, 1, 1, 1};
    Tensor v(d);
    for (size_t i = 0; i < v.size(); ++i) v.data()[i] = 1.0f;
    ConvKernel k;
    k.taps = 3;
    k.weights = {0.5f, 0.5f, 0.5f};
    k.bias = {0.0f};
    const Tensor out = temporal_conv(v, k);
    CHECK(out.at(2, 0, 0)[0] == 1.5);
    CHECK(out.at(0, 0, 0)[0] == 1.0);
    CHECK(out.at(4, 0, 0)[0] == 1.0);
    CHECK(out.at(0, 0, 0)[0] == doctest::Approx(out.at(2, 0, 0)[0] * 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("conv is linear when bias is zero") {
    const Dims d{6, 2, 2, 3};
    const Tensor v = tensor_from_seed(d, 44);
    const ConvKernel k = make_kernel(3, d.c, 45, /*bias_scale=*/0.0f);
    Tensor scaled(d);
    for (size_t i = 0; i < v.size(); ++i) scaled.data()[i] = 2.0f * v.data()[i];
    const Tensor a = temporal_conv(scaled, k);
    const Tensor b = temporal_conv(v, k);
    double diff = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        diff = std::max(diff, std::abs(double(a.data()[i]) - 2.0 * double(b.data()[i])));
    CHECK(diff <= 1e-6);
}

TEST_CASE("conv_over_extended computes a sub-range consistently") {
    const Dims d{9, 1, 2, 2};
    const Tensor v = tensor_from_seed(d, 9);
    const ConvKernel k = make_kernel(3, d.c, 10);
    const Tensor whole = temporal_conv(v, k);
    const Tensor mid = conv_over_extended(v, 3, 4, k);
    const Tensor want = slice_frames(whole, {3, 4});
    CHECK(max_abs_diff(mid, want) == 0.0);  // same code path, same order
    CHECK_THROWS_AS(conv_over_extended(v, 8, 2, k), RangeError);
    ConvKernel bad = k;
    bad.taps = 4;
    CHECK_THROWS_AS(temporal_conv(v, bad), ConfigError);
    CHECK_THROWS_AS(temporal_conv(Tensor(Dims{1, 1, 1, 3}), k), ShapeError);
}

// --- group norm ----------------------------------------------------------------

TEST_CASE("group statistics on a hand-computed example") {
    // C=2, groups=2: channel 0 -> group 0, channel 1 -> group 1.
    Tensor v(Dims{2, 1, 1, 2});
    v.at(0, 0, 0)[0] = 1.0f;
    v.at(0, 0, 0)[1] = 10.0f;
    v.at(1, 0, 0)[0] = 3.0f;
    v.at(1, 0, 0)[1] = 30.0f;
    const auto means = group_means(v, 2);
    REQUIRE(means.size() == 2);
    CHECK(means[0] == 2.0);
    CHECK(means[1] == 20.0);
    const auto vars = group_sqdev(v, 2, means);
    CHECK(vars[0] == 1.0);
    CHECK(vars[1] == 100.0);

    // one group spanning both channels
    const auto all = group_means(v, 1);
    CHECK(all[0] == 11.0);
}

TEST_CASE("group norm output matches the definition") {
    const Dims d{4, 2, 2, 6};
    const Tensor v = tensor_from_seed(d, 17);
    for (uint32_t groups : {1u, 2u, 3u, 6u}) {
        GroupNormParams p = make_norm(groups, d.c, 71);
        const Tensor out = group_norm(v, p);
        const auto means = group_means(v, groups);
        const auto vars = group_sqdev(v, groups, means);
        const uint32_t gsize = d.c / groups;
        double worst = 0.0;
        for (uint32_t f = 0; f < d.f; ++f)
            for (uint32_t h = 0; h < d.h; ++h)
                for (uint32_t w = 0; w < d.w; ++w)
                    for (uint32_t c = 0; c < d.c; ++c) {
                        const uint32_t g = c / gsize;
                        const double want =
                            double(p.gamma[c]) * (double(v.at(f, h, w)[c]) - means[g]) /
                                std::sqrt(vars[g] + double(p.epsilon)) +
                            double(p.beta[c]);
                        worst = std::max(worst,
                                         std::abs(double(out.at(f, h, w)[c]) - want));
                    }
        CAPTURE(groups);
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("group norm is shift invariant and output is standardized") {
    const Dims d{4, 2, 2, 4};
    const Tensor v = tensor_from_seed(d, 23);
    GroupNormParams p;
    p.groups = 2;
    p.gamma.assign(d.c, 1.0f);
    p.beta.assign(d.c, 0.0f);
    p.epsilon = 1e-12f;

    Tensor shifted(d);
    for (size_t i = 0; i < v.size(); ++i) shifted.data()[i] = v.data()[i] + 5.0f;
    // only f32 rounding of the shifted inputs separates the two
    CHECK(max_abs_diff(group_norm(v, p), group_norm(shifted, p)) <= 1e-5);

    // unit gamma / zero beta output has zero mean and unit variance per group
    const Tensor out = group_norm(v, p);
    const auto means = group_means(out, p.groups);
    const auto vars = group_sqdev(out, p.groups, means);
    for (uint32_t g = 0; g < p.groups; ++g) {
        CHECK(std::abs(means[g]) <= 5e-7);
        CHECK(vars[g] == doctest::Approx(1.0).epsilon(1e-6));
    }

    CHECK_THROWS_AS(group_norm(v, make_norm(3, d.c, 1)), ConfigError);  // 3 ∤ 4
}

// --- token sets ----------------------------------------------------------------

TEST_CASE("local window is a clamped inclusive band") {
    // interior: [a-8, a+8]
    auto w = build_local_window(16, 64, 16);
    REQUIRE(w.size() == 17);
    CHECK(w.front() == 8);
    CHECK(w.back() == 24);
    for (size_t i = 1; i < w.size(); ++i) CHECK(w[i] == w[i - 1] + 1);

    // clamped at the start
    w = build_local_window(0, 64, 16);
    REQUIRE(w.size() == 9);
    CHECK(w.front() == 0);
    CHECK(w.back() == 8);

    // clamped at the end
    w = build_local_window(63, 64, 16);
    REQUIRE(w.size() == 9);
    CHECK(w.front() == 55);
    CHECK(w.back() == 63);

    // a window never misses its own query frame, even on a 1-frame video
    w = build_local_window(0, 1, 16);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 0);

    CHECK_THROWS_AS(build_local_window(5, 5, 16), RangeError);
}

TEST_CASE("global index set is the floor-spaced sample") {
    // F=24, n=16: floor(1.5 j)
    const std::vector<uint32_t> want24 = {0, 1,  3,  4,  6,  7,  9,  10,
                                          12, 13, 15, 16, 18, 19, 21, 22};
    CHECK(build_global_index_set(24, 16) == want24);

    // F=32, n=16: stride 2
    const auto got32 = build_global_index_set(32, 16);
    REQUIRE(got32.size() == 16);
    for (uint32_t j = 0; j < 16; ++j) CHECK(got32[j] == 2 * j);

    // F == n: identity
    const auto id = build_global_index_set(16, 16);
    for (uint32_t j = 0; j < 16; ++j) CHECK(id[j] == j);

    CHECK(build_global_index_set(8, 0).empty());
    CHECK_THROWS_AS(build_global_index_set(8, 9), ConfigError);

    // strictly increasing whenever n <= F
    for (uint32_t F : {16u, 17u, 24u, 100u}) {
        const auto s = build_global_index_set(F, 16);
        for (size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
        CHECK(s.back() < F);
    }
}

// --- attention -----------------------------------------------------------------

TEST_CASE("full attention softmax rows sum to one and resist large logits") {
    const Dims d{6, 2, 2, 4};
    Tensor v = tensor_from_seed(d, 3);
    for (size_t i = 0; i < v.size(); ++i) v.data()[i] *= 100.0f;  // stress the exp
    AttentionParams p = make_attention(d.c, 8);
    ScoreProbe probe;
    const Tensor out = attention_full(v, p, &probe);
    REQUIRE(probe.row_sums.size() == size_t(d.f) * d.h * d.w);
    for (double s : probe.row_sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    for (size_t i = 0; i < out.size(); ++i) CHECK(std::isfinite(out.data()[i]));
}

TEST_CASE("attention on a single frame is the projection chain") {
    const Dims d{1, 1, 1, 4};
    const Tensor v = tensor_from_seed(d, 77);
    const AttentionParams p = make_attention(d.c, 78);
    const Tensor out = attention_full(v, p);
    // one token -> softmax weight 1 -> out = Wo (Wv x)
    std::vector<float> vv(4), want(4);
    project_vec(p.wv.data(), v.at(0, 0, 0), 4, vv.data());
    project_vec(p.wo.data(), vv.data(), 4, want.data());
    for (uint32_t c = 0; c < 4; ++c) CHECK(out.at(0, 0, 0)[c] == want[c]);
}

TEST_CASE("zero query weights give the uniform average") {
    const Dims d{5, 1, 1, 3};
    const Tensor v = tensor_from_seed(d, 55);
    AttentionParams p = make_attention(d.c, 56);
    std::fill(p.wq.begin(), p.wq.end(), 0.0f);  // all logits identical
    const Tensor out = attention_full(v, p);
    // expected: Wo applied to the mean of the value projections
    std::vector<double> mean(3, 0.0);
    std::vector<float> tmp(3);
    for (uint32_t f = 0; f < d.f; ++f) {
        project_vec(p.wv.data(), v.at(f, 0, 0), 3, tmp.data());
        for (uint32_t c = 0; c < 3; ++c) mean[c] += double(tmp[c]) / d.f;
    }
    std::vector<float> meanf(3), want(3);
    for (uint32_t c = 0; c < 3; ++c) meanf[c] = float(mean[c]);
    project_vec(p.wo.data(), meanf.data(), 3, want.data());
    for (uint32_t a = 0; a < d.f; ++a)
        for (uint32_t c = 0; c < 3; ++c)
            CHECK(out.at(a, 0, 0)[c] == doctest::Approx(want[c]).epsilon(1e-6));
}

TEST_CASE("dual-scope matches the brute-force oracle on both sides of t_star") {
    const Dims d{24, 2, 2, 4};
    const Tensor v = tensor_from_seed(d, 60);
    const AttentionParams p = make_attention(d.c, 61);
    DualScopeConfig cfg;
    cfg.n_local = 6;
    cfg.n_global = 5;
    cfg.bias = 4.0f;
    cfg.t_star = 800.0;
    for (double t : {700.0, 900.0}) {
        CAPTURE(t);
        const Tensor got = dual_scope_reference(v, t, p, cfg);
        const Tensor want = dual_scope_oracle(v, t, p, cfg);
        CHECK(max_abs_diff(got, want) <= 1e-6);
    }
    // the bias target actually switches sides
    const Tensor early = dual_scope_reference(v, 900.0, p, cfg);  // bias on global
    const Tensor late = dual_scope_reference(v, 700.0, p, cfg);   // bias on window
    CHECK(max_abs_diff(early, late) > 1e-3);
    // boundary: t == t_star biases the window side (strict inequality)
    const Tensor at_star = dual_scope_reference(v, 800.0, p, cfg);
    CHECK(max_abs_diff(at_star, late) == 0.0);
}

TEST_CASE("degenerate dual scope equals full attention") {
    // window spans every frame and the global set is the identity with zero
    // bias; duplicated tokens halve the weights but the mixture is unchanged.
    const Dims d{10, 2, 2, 4};
    const Tensor v = tensor_from_seed(d, 90);
    const AttentionParams p = make_attention(d.c, 91);
    DualScopeConfig cfg;
    cfg.n_local = 2 * (d.f - 1);
    cfg.n_global = d.f;
    cfg.bias = 0.0f;
    const Tensor got = dual_scope_reference(v, 900.0, p, cfg);
    const Tensor want = attention_full(v, p);
    CHECK(max_abs_diff(got, want) <= 1e-6);
}

TEST_CASE("attention counters count tokens, queries and the per-query max") {
    const Dims d{64, 1, 2, 4};
    const Tensor v = tensor_from_seed(d, 13);
    const AttentionParams p = make_attention(d.c, 14);
    DualScopeConfig cfg;  // defaults: n_local 16, n_global 16
    AttnCounters n;
    (void)dual_scope_reference(v, 900.0, p, cfg, &n);
    CHECK(n.queries == uint64_t(d.f) * d.h * d.w);
    CHECK(n.max_tokens_per_query == 17 + 16);  // inclusive window + global set
    CHECK(n.score_entries <= n.queries * (17 + 16));
    // interior dominates, so the bound is nearly tight
    CHECK(n.score_entries > n.queries * 28);
}
