#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace vinf {

// Layer parameter bundles. Weight layouts are row-major [out][in]; conv
// weights are [tap][out][in]. All validated at use.

struct ConvKernel {
    uint32_t taps = 1;           // k, odd
    std::vector<float> weights;  // taps * C * C
    std::vector<float> bias;     // C

    uint32_t channels() const { return uint32_t(bias.size()); }
    uint32_t halo() const { return (taps - 1) / 2; }
};

struct GroupNormParams {
    uint32_t groups = 1;  // must divide C
    std::vector<float> gamma;
    std::vector<float> beta;
    float epsilon = 1e-5f;

    uint32_t channels() const { return uint32_t(gamma.size()); }
};

struct AttentionParams {
    uint32_t dim = 0;  // single head, head dim = C
    std::vector<float> wq, wk, wv, wo;  // C * C each
    float scale = 0.0f;                 // 1/sqrt(dim)
};

struct DualScopeConfig {
    uint32_t n_local = 16;   // window size, even, >= 2
    uint32_t n_global = 16;  // uniformly sampled global tokens
    float bias = 10.0f;      // pre-softmax logit bias
    double t_star = 800.0;   // bias goes to global tokens when t > t_star
};

// --- spatial stub -----------------------------------------------------------

// Per-channel affine + tanh; no cross-frame data flow. The (a, c) form is the
// test hook: spatial_stub derives the coefficients from a seed.
Tensor spatial_affine_tanh(const Tensor& v, const std::vector<float>& a,
                           const std::vector<float>& c);
// First C draws of the seeded stream are a, next C are c.
std::pair<std::vector<float>, std::vector<float>> spatial_stub_coeffs(uint32_t channels,
                                                                      uint64_t seed);
Tensor spatial_stub(const Tensor& v, uint64_t seed);

// --- temporal convolution ---------------------------------------------------

// Shared core for the sequential and distributed paths. Computes output
// frames [out_start, out_start+out_len) of `ext`, reading ext frames
// out_start+f+j for j in [-halo, halo] and treating frames outside
// [0, ext.F) as zeros. The distributed form passes [c_pre | v | c_post] as
// ext, so zero padding only ever applies at the global video boundary.
Tensor conv_over_extended(const Tensor& ext, uint32_t out_start, uint32_t out_len,
                          const ConvKernel& kern);

Tensor temporal_conv(const Tensor& v, const ConvKernel& kern);

// --- group normalization ----------------------------------------------------

// Two-pass statistics split into cores so the distributed form can aggregate
// partial results between the passes. Channels are grouped contiguously:
// group(ch) = ch / (C/groups). Accumulation is f64 throughout.
std::vector<double> group_means(const Tensor& v, uint32_t groups);
std::vector<double> group_sqdev(const Tensor& v, uint32_t groups,
                                const std::vector<double>& means);
Tensor normalize_with_stats(const Tensor& v, const GroupNormParams& p,
                            const std::vector<double>& means,
                            const std::vector<double>& vars);

Tensor group_norm(const Tensor& v, const GroupNormParams& p);

// --- attention --------------------------------------------------------------

// Window of n_local/2 frames each side of a, clamped (not wrapped) to [0, F);
// ascending, always containing a itself.
std::vector<uint32_t> build_local_window(uint32_t a, uint32_t frames, uint32_t n_local);

// floor(j * F / n_global) for j = 0..n_global-1; strictly increasing.
// n_global == 0 yields an empty set; n_global > F is a config error.
std::vector<uint32_t> build_global_index_set(uint32_t frames, uint32_t n_global);

// Test hook: post-softmax row sums, one per (location, query) in scan order.
struct ScoreProbe {
    std::vector<double> row_sums;
};

// Instrumentation shared by reference and distributed attention.
struct AttnCounters {
    uint64_t score_entries = 0;      // one per (query, token) logit
    uint64_t queries = 0;            // one per (location, query frame)
    uint64_t max_tokens_per_query = 0;
};

Tensor attention_full(const Tensor& v, const AttentionParams& p, ScoreProbe* probe = nullptr);

Tensor dual_scope_reference(const Tensor& v, double t, const AttentionParams& p,
                            const DualScopeConfig& cfg, AttnCounters* counters = nullptr);

// --- shared attention internals (used by the distributed form) --------------

// y = W x for a C-vector, f64 accumulation. W is row-major [out][in].
void project_vec(const float* w, const float* x, uint32_t dim, float* y);

// One softmax-attention row over an explicit token list. keys/values are
// row-major [token][dim] matrices; tokens indexes rows; biased[i] selects the
// +bias logit. Writes the pre-output-projection context vector.
void attend_tokens(const float* q, const float* keys, const float* values,
                   const std::vector<uint32_t>& tokens, const std::vector<uint8_t>& biased,
                   float bias, float scale, uint32_t dim, float* ctx,
                   double* row_sum = nullptr);

void validate_conv(const ConvKernel& kern, uint32_t channels);
void validate_group_norm(const GroupNormParams& p, uint32_t channels);
void validate_attention(const AttentionParams& p, uint32_t channels);

}  // namespace vinf
