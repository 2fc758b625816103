#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/pipeline.hpp"
#include "core/tensor.hpp"

namespace vinf {

// Flat key=value run configuration. The canonical rendering (all keys, sorted,
// one per line) is what gets digested for the transport handshake, so two
// processes agree on a run iff their digests match.
struct RunConfig {
    uint32_t frames = 16;
    uint32_t height = 4;
    uint32_t width = 4;
    uint32_t channels = 8;
    uint32_t workers = 1;

    uint32_t blocks = 1;
    uint32_t taps = 3;
    uint32_t groups = 2;
    uint32_t n_local = 16;
    uint32_t n_global = 16;
    double bias = 10.0;
    double t_star = 800.0;

    uint32_t steps = 30;
    uint64_t seed = 0;
    uint64_t weight_seed = 1;

    std::string transport = "inproc";
    std::string listen = "127.0.0.1:45600";
    bool validating = false;
    bool sequential = false;   // force the single-process oracle path
    std::string ablate = "none";  // none | conv | groupnorm | attention

    Dims dims() const { return Dims{frames, height, width, channels}; }
    ModelConfig model_config() const;
    DenoiseConfig denoise_config() const;
    std::optional<LayerKind> ablate_kind() const;
};

// '#' starts a comment; blank lines ignored; unknown keys are errors.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
void apply_config_set(RunConfig& cfg, const std::string& key, const std::string& value);

std::string canonical_config_text(const RunConfig& cfg);
uint64_t config_digest(const RunConfig& cfg);

// Every violated constraint by name; empty means the config is runnable.
std::vector<std::string> config_violations(const RunConfig& cfg);
void validate_config(const RunConfig& cfg);  // throws ConfigError listing them

}  // namespace vinf
