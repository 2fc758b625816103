#include "core/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/digest.hpp"

namespace vinf {

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.blocks = blocks;
    mc.channels = channels;
    mc.taps = taps;
    mc.groups = groups;
    mc.dual_scope.n_local = n_local;
    mc.dual_scope.n_global = n_global;
    mc.dual_scope.bias = float(bias);
    mc.dual_scope.t_star = t_star;
    mc.weight_seed = weight_seed;
    return mc;
}

DenoiseConfig RunConfig::denoise_config() const {
    return DenoiseConfig{steps};
}

std::optional<LayerKind> RunConfig::ablate_kind() const {
    if (ablate == "conv") return LayerKind::Conv;
    if (ablate == "groupnorm") return LayerKind::GroupNorm;
    if (ablate == "attention") return LayerKind::Attention;
    return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    size_t pos = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (...) {
        throw ConfigError("value for '" + key + "' is not an integer: " + value);
    }
    if (pos != value.size()) throw ConfigError("value for '" + key + "' is not an integer: " + value);
    return v;
}

uint32_t parse_u32(const std::string& key, const std::string& value) {
    uint64_t v = parse_u64(key, value);
    if (v > 0xffffffffull) throw ConfigError("value for '" + key + "' out of range: " + value);
    return uint32_t(v);
}

double parse_f64(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(value, &pos);
    } catch (...) {
        throw ConfigError("value for '" + key + "' is not a number: " + value);
    }
    if (pos != value.size()) throw ConfigError("value for '" + key + "' is not a number: " + value);
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("value for '" + key + "' must be true or false: " + value);
}

std::string render_f64(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void apply_config_set(RunConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "frames") c.frames = parse_u32(key, value);
    else if (key == "height") c.height = parse_u32(key, value);
    else if (key == "width") c.width = parse_u32(key, value);
    else if (key == "channels") c.channels = parse_u32(key, value);
    else if (key == "workers") c.workers = parse_u32(key, value);
    else if (key == "blocks") c.blocks = parse_u32(key, value);
    else if (key == "taps") c.taps = parse_u32(key, value);
    else if (key == "groups") c.groups = parse_u32(key, value);
    else if (key == "n_local") c.n_local = parse_u32(key, value);
    else if (key == "n_global") c.n_global = parse_u32(key, value);
    else if (key == "bias") c.bias = parse_f64(key, value);
    else if (key == "t_star") c.t_star = parse_f64(key, value);
    else if (key == "steps") c.steps = parse_u32(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "weight_seed") c.weight_seed = parse_u64(key, value);
    else if (key == "transport") c.transport = value;
    else if (key == "listen") c.listen = value;
    else if (key == "validating") c.validating = parse_bool(key, value);
    else if (key == "sequential") c.sequential = parse_bool(key, value);
    else if (key == "ablate") c.ablate = value;
    else throw ConfigError("unknown config key: " + key);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " has no '=': " + line);
        }
        apply_config_set(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_config_text(const RunConfig& c) {
    // Keys emitted in sorted order, every key present.
    std::string out;
    auto kv = [&out](const char* k, const std::string& v) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    };
    kv("ablate", c.ablate);
    kv("bias", render_f64(c.bias));
    kv("blocks", std::to_string(c.blocks));
    kv("channels", std::to_string(c.channels));
    kv("frames", std::to_string(c.frames));
    kv("groups", std::to_string(c.groups));
    kv("height", std::to_string(c.height));
    kv("listen", c.listen);
    kv("n_global", std::to_string(c.n_global));
    kv("n_local", std::to_string(c.n_local));
    kv("seed", std::to_string(c.seed));
    kv("sequential", c.sequential ? "true" : "false");
    kv("steps", std::to_string(c.steps));
    kv("t_star", render_f64(c.t_star));
    kv("taps", std::to_string(c.taps));
    kv("transport", c.transport);
    kv("validating", c.validating ? "true" : "false");
    kv("weight_seed", std::to_string(c.weight_seed));
    kv("width", std::to_string(c.width));
    kv("workers", std::to_string(c.workers));
    return out;
}

uint64_t config_digest(const RunConfig& cfg) {
    return fnv1a64(canonical_config_text(cfg));
}

std::vector<std::string> config_violations(const RunConfig& c) {
    std::vector<std::string> v;
    auto bad = [&v](const std::string& msg) { v.push_back(msg); };

    if (c.frames == 0) bad("frames must be >= 1");
    if (c.height == 0) bad("height must be >= 1");
    if (c.width == 0) bad("width must be >= 1");
    if (c.channels == 0) bad("channels must be >= 1");
    if (c.workers == 0) bad("workers must be >= 1");
    if (c.blocks == 0) bad("blocks must be >= 1");
    if (c.steps == 0) bad("steps must be >= 1");
    if (c.taps == 0 || c.taps % 2 == 0) {
        bad("taps must be odd and >= 1 (got " + std::to_string(c.taps) + ")");
    }
    if (c.groups == 0 || (c.channels != 0 && c.channels % c.groups != 0)) {
        bad("groups must divide channels (groups=" + std::to_string(c.groups) + " channels=" +
            std::to_string(c.channels) + ")");
    }
    if (c.n_local < 2 || c.n_local % 2 != 0) {
        bad("n_local must be even and >= 2 (got " + std::to_string(c.n_local) + ")");
    }
    if (c.n_global > c.frames) {
        bad("n_global must not exceed frames (n_global=" + std::to_string(c.n_global) +
            " frames=" + std::to_string(c.frames) + ")");
    }
    if (c.bias < 0) bad("bias must be >= 0");
    if (c.workers != 0 && c.frames % c.workers != 0) {
        bad("workers must divide frames evenly (frames=" + std::to_string(c.frames) +
            " workers=" + std::to_string(c.workers) + ")");
    } else if (c.workers != 0 && c.frames != 0) {
        const uint32_t f_clip = c.frames / c.workers;
        if (c.taps / 2 > f_clip) {
            bad("conv halo exceeds clip ((taps-1)/2=" + std::to_string(c.taps / 2) +
                " > frames/workers=" + std::to_string(f_clip) + ")");
        }
        if (c.n_local / 2 > f_clip) {
            bad("attention halo exceeds clip (n_local/2=" + std::to_string(c.n_local / 2) +
                " > frames/workers=" + std::to_string(f_clip) + ")");
        }
    }
    if (c.transport != "inproc" && c.transport != "tcp") {
        bad("transport must be inproc or tcp (got '" + c.transport + "')");
    }
    if (c.transport == "tcp") {
        const size_t colon = c.listen.rfind(':');
        bool ok = colon != std::string::npos && colon > 0 && colon + 1 < c.listen.size();
        if (ok) {
            for (size_t i = colon + 1; i < c.listen.size(); ++i) {
                if (!isdigit((unsigned char)c.listen[i])) ok = false;
            }
        }
        if (!ok) bad("listen must be host:port (got '" + c.listen + "')");
    }
    if (c.ablate != "none" && c.ablate != "conv" && c.ablate != "groupnorm" &&
        c.ablate != "attention") {
        bad("ablate must be none, conv, groupnorm, or attention (got '" + c.ablate + "')");
    }
    return v;
}

void validate_config(const RunConfig& cfg) {
    const auto violations = config_violations(cfg);
    if (violations.empty()) return;
    std::string msg = "invalid config:";
    for (const auto& m : violations) {
        msg += "\n  - ";
        msg += m;
    }
    throw ConfigError(msg);
}

}  // namespace vinf
