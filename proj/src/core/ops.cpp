#include "core/ops.hpp"

#include <cmath>
#include <string>

#include "core/rng.hpp"

namespace vinf {

void validate_conv(const ConvKernel& kern, uint32_t channels) {
    if (kern.taps == 0 || kern.taps % 2 == 0) {
        throw ConfigError("conv taps must be odd and >= 1, got " + std::to_string(kern.taps));
    }
    if (kern.bias.size() != channels ||
        kern.weights.size() != size_t(kern.taps) * channels * channels) {
        throw ShapeError("conv kernel sized for wrong channel count");
    }
}

void validate_group_norm(const GroupNormParams& p, uint32_t channels) {
    if (p.groups == 0 || channels % p.groups != 0) {
        throw ConfigError("norm groups must divide channels: groups=" + std::to_string(p.groups) +
                          " channels=" + std::to_string(channels));
    }
    if (p.gamma.size() != channels || p.beta.size() != channels) {
        throw ShapeError("group norm params sized for wrong channel count");
    }
    if (!(p.epsilon > 0.0f)) throw ConfigError("group norm epsilon must be > 0");
}

void validate_attention(const AttentionParams& p, uint32_t channels) {
    if (p.dim != channels) throw ShapeError("attention dim does not match channels");
    const size_t n = size_t(channels) * channels;
    if (p.wq.size() != n || p.wk.size() != n || p.wv.size() != n || p.wo.size() != n) {
        throw ShapeError("attention projections must be C x C");
    }
    if (!(p.scale > 0.0f)) throw ConfigError("attention scale must be > 0");
}

// --- spatial stub -----------------------------------------------------------

Tensor spatial_affine_tanh(const Tensor& v, const std::vector<float>& a,
                           const std::vector<float>& c) {
    const uint32_t C = v.dims().c;
    if (a.size() != C || c.size() != C) throw ShapeError("stub coeffs must have C entries");
    Tensor out(v.dims());
    const float* in = v.data();
    float* o = out.data();
    const size_t total = v.size();
    for (size_t i = 0; i < total; ++i) {
        const uint32_t ch = uint32_t(i % C);
        o[i] = std::tanh(a[ch] * in[i] + c[ch]);
    }
    return out;
}

std::pair<std::vector<float>, std::vector<float>> spatial_stub_coeffs(uint32_t channels,
                                                                      uint64_t seed) {
    SeededRng rng(seed);
    std::vector<float> a(channels), c(channels);
    for (uint32_t i = 0; i < channels; ++i) a[i] = rng.next_unit();
    for (uint32_t i = 0; i < channels; ++i) c[i] = rng.next_unit();
    return {std::move(a), std::move(c)};
}

Tensor spatial_stub(const Tensor& v, uint64_t seed) {
    auto [a, c] = spatial_stub_coeffs(v.dims().c, seed);
    return spatial_affine_tanh(v, a, c);
}

// --- temporal convolution ---------------------------------------------------

Tensor conv_over_extended(const Tensor& ext, uint32_t out_start, uint32_t out_len,
                          const ConvKernel& kern) {
    const Dims& d = ext.dims();
    validate_conv(kern, d.c);
    if (out_len == 0 || out_start > d.f || out_len > d.f - out_start) {
        throw RangeError("conv output range outside extended tensor");
    }
    const uint32_t C = d.c;
    const int halo = int(kern.halo());
    Dims od = d;
    od.f = out_len;
    Tensor out(od);

    const size_t pos_count = size_t(d.h) * d.w;
    for (uint32_t f = 0; f < out_len; ++f) {
        for (size_t pos = 0; pos < pos_count; ++pos) {
            float* o = out.frame(f) + pos * C;
            for (uint32_t oc = 0; oc < C; ++oc) {
                double acc = double(kern.bias[oc]);
                for (int j = -halo; j <= halo; ++j) {
                    const int64_t sf = int64_t(out_start) + f + j;
                    if (sf < 0 || sf >= int64_t(d.f)) continue;  // global boundary: zeros
                    const float* in = ext.frame(uint32_t(sf)) + pos * C;
                    const float* wrow = kern.weights.data() + (size_t(j + halo) * C + oc) * C;
                    for (uint32_t ic = 0; ic < C; ++ic) acc += double(wrow[ic]) * double(in[ic]);
                }
                o[oc] = float(acc);
            }
        }
    }
    return out;
}

Tensor temporal_conv(const Tensor& v, const ConvKernel& kern) {
    return conv_over_extended(v, 0, v.dims().f, kern);
}

// --- group normalization ----------------------------------------------------

std::vector<double> group_means(const Tensor& v, uint32_t groups) {
    const uint32_t C = v.dims().c;
    if (groups == 0 || C % groups != 0) throw ConfigError("groups must divide channels");
    const uint32_t gsize = C / groups;
    std::vector<double> sums(groups, 0.0);
    const float* p = v.data();
    const size_t total = v.size();
    for (size_t i = 0; i < total; ++i) sums[(i % C) / gsize] += double(p[i]);
    const double count = double(total / groups);
    for (double& s : sums) s /= count;
    return sums;
}

std::vector<double> group_sqdev(const Tensor& v, uint32_t groups,
                                const std::vector<double>& means) {
    const uint32_t C = v.dims().c;
    if (groups == 0 || C % groups != 0) throw ConfigError("groups must divide channels");
    if (means.size() != groups) throw ShapeError("means must have one entry per group");
    const uint32_t gsize = C / groups;
    std::vector<double> sums(groups, 0.0);
    const float* p = v.data();
    const size_t total = v.size();
    for (size_t i = 0; i < total; ++i) {
        const uint32_t g = uint32_t(i % C) / gsize;
        const double d = double(p[i]) - means[g];
        sums[g] += d * d;
    }
    const double count = double(total / groups);
    for (double& s : sums) s /= count;
    return sums;
}

Tensor normalize_with_stats(const Tensor& v, const GroupNormParams& p,
                            const std::vector<double>& means,
                            const std::vector<double>& vars) {
    const uint32_t C = v.dims().c;
    validate_group_norm(p, C);
    if (means.size() != p.groups || vars.size() != p.groups) {
        throw ShapeError("stats must have one entry per group");
    }
    const uint32_t gsize = C / p.groups;
    std::vector<double> inv(p.groups);
    for (uint32_t g = 0; g < p.groups; ++g) inv[g] = 1.0 / std::sqrt(vars[g] + double(p.epsilon));

    Tensor out(v.dims());
    const float* in = v.data();
    float* o = out.data();
    const size_t total = v.size();
    for (size_t i = 0; i < total; ++i) {
        const uint32_t ch = uint32_t(i % C);
        const uint32_t g = ch / gsize;
        o[i] = float(double(p.gamma[ch]) * ((double(in[i]) - means[g]) * inv[g]) +
                     double(p.beta[ch]));
    }
    return out;
}

Tensor group_norm(const Tensor& v, const GroupNormParams& p) {
    const auto means = group_means(v, p.groups);
    const auto vars = group_sqdev(v, p.groups, means);
    return normalize_with_stats(v, p, means, vars);
}

// --- attention --------------------------------------------------------------

std::vector<uint32_t> build_local_window(uint32_t a, uint32_t frames, uint32_t n_local) {
    if (a >= frames) throw RangeError("query frame outside video");
    const uint32_t half = n_local / 2;
    const uint32_t lo = a > half ? a - half : 0;
    const uint32_t hi = (a + half < frames) ? a + half : frames - 1;
    std::vector<uint32_t> w;
    w.reserve(hi - lo + 1);
    for (uint32_t i = lo; i <= hi; ++i) w.push_back(i);
    return w;
}

std::vector<uint32_t> build_global_index_set(uint32_t frames, uint32_t n_global) {
    if (n_global > frames) {
        throw ConfigError("global set size exceeds frame count: " + std::to_string(n_global) +
                          " > " + std::to_string(frames));
    }
    std::vector<uint32_t> idx(n_global);
    for (uint32_t j = 0; j < n_global; ++j) {
        idx[j] = uint32_t((uint64_t(j) * frames) / n_global);
    }
    return idx;
}

void project_vec(const float* w, const float* x, uint32_t dim, float* y) {
    for (uint32_t o = 0; o < dim; ++o) {
        double acc = 0.0;
        const float* row = w + size_t(o) * dim;
        for (uint32_t i = 0; i < dim; ++i) acc += double(row[i]) * double(x[i]);
        y[o] = float(acc);
    }
}

void attend_tokens(const float* q, const float* keys, const float* values,
                   const std::vector<uint32_t>& tokens, const std::vector<uint8_t>& biased,
                   float bias, float scale, uint32_t dim, float* ctx, double* row_sum) {
    const size_t n = tokens.size();
    static thread_local std::vector<double> logits;
    logits.resize(n);
    double mx = -1e300;
    for (size_t i = 0; i < n; ++i) {
        const float* k = keys + size_t(tokens[i]) * dim;
        double dot = 0.0;
        for (uint32_t c = 0; c < dim; ++c) dot += double(q[c]) * double(k[c]);
        double l = double(scale) * dot;
        if (biased[i]) l += double(bias);
        logits[i] = l;
        if (l > mx) mx = l;
    }
    double denom = 0.0;
    for (size_t i = 0; i < n; ++i) {
        logits[i] = std::exp(logits[i] - mx);
        denom += logits[i];
    }
    static thread_local std::vector<double> acc;
    acc.assign(dim, 0.0);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double wgt = logits[i] / denom;
        sum += wgt;
        const float* v = values + size_t(tokens[i]) * dim;
        for (uint32_t c = 0; c < dim; ++c) acc[c] += wgt * double(v[c]);
    }
    for (uint32_t c = 0; c < dim; ++c) ctx[c] = float(acc[c]);
    if (row_sum) *row_sum = sum;
}

namespace {

// Q/K/V for all frames of `src` at one spatial position. Row f of each output
// is the projection of src frame f's channel vector at (h, w).
void project_location(const Tensor& src, uint32_t h, uint32_t w, const AttentionParams& p,
                      std::vector<float>* qm, std::vector<float>* km, std::vector<float>* vm) {
    const uint32_t F = src.dims().f;
    const uint32_t C = p.dim;
    if (qm) qm->resize(size_t(F) * C);
    km->resize(size_t(F) * C);
    vm->resize(size_t(F) * C);
    for (uint32_t f = 0; f < F; ++f) {
        const float* x = src.at(f, h, w);
        if (qm) project_vec(p.wq.data(), x, C, qm->data() + size_t(f) * C);
        project_vec(p.wk.data(), x, C, km->data() + size_t(f) * C);
        project_vec(p.wv.data(), x, C, vm->data() + size_t(f) * C);
    }
}

}  // namespace

Tensor attention_full(const Tensor& v, const AttentionParams& p, ScoreProbe* probe) {
    const Dims& d = v.dims();
    validate_attention(p, d.c);
    const uint32_t F = d.f;
    const uint32_t C = d.c;
    Tensor out(d);

    std::vector<uint32_t> all(F);
    for (uint32_t i = 0; i < F; ++i) all[i] = i;
    const std::vector<uint8_t> unbiased(F, 0);

    std::vector<float> qm, km, vm, ctx(C);
    for (uint32_t h = 0; h < d.h; ++h) {
        for (uint32_t w = 0; w < d.w; ++w) {
            project_location(v, h, w, p, &qm, &km, &vm);
            for (uint32_t a = 0; a < F; ++a) {
                double row = 0.0;
                attend_tokens(qm.data() + size_t(a) * C, km.data(), vm.data(), all, unbiased,
                              0.0f, p.scale, C, ctx.data(), probe ? &row : nullptr);
                if (probe) probe->row_sums.push_back(row);
                project_vec(p.wo.data(), ctx.data(), C, out.at(a, h, w));
            }
        }
    }
    return out;
}

Tensor dual_scope_reference(const Tensor& v, double t, const AttentionParams& p,
                            const DualScopeConfig& cfg, AttnCounters* counters) {
    const Dims& d = v.dims();
    validate_attention(p, d.c);
    const uint32_t F = d.f;
    const uint32_t C = d.c;
    const auto global_set = build_global_index_set(F, cfg.n_global);
    const bool bias_global = t > cfg.t_star;

    // Token lists depend only on the query frame; build them once per query.
    std::vector<std::vector<uint32_t>> tokens(F);
    std::vector<std::vector<uint8_t>> flags(F);
    for (uint32_t a = 0; a < F; ++a) {
        const auto window = build_local_window(a, F, cfg.n_local);
        auto& tk = tokens[a];
        auto& fl = flags[a];
        tk.reserve(window.size() + global_set.size());
        for (uint32_t i : window) {
            tk.push_back(i);
            fl.push_back(bias_global ? 0 : 1);
        }
        for (uint32_t i : global_set) {
            tk.push_back(i);
            fl.push_back(bias_global ? 1 : 0);
        }
    }

    Tensor out(d);
    std::vector<float> qm, km, vm, ctx(C);
    for (uint32_t h = 0; h < d.h; ++h) {
        for (uint32_t w = 0; w < d.w; ++w) {
            project_location(v, h, w, p, &qm, &km, &vm);
            for (uint32_t a = 0; a < F; ++a) {
                attend_tokens(qm.data() + size_t(a) * C, km.data(), vm.data(), tokens[a],
                              flags[a], cfg.bias, p.scale, C, ctx.data());
                project_vec(p.wo.data(), ctx.data(), C, out.at(a, h, w));
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

}  // namespace vinf
