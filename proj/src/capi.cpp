#include "vinf.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <string>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/runner.hpp"
#include "core/schedule.hpp"
#include "core/tensor_io.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) {
    g_last_error = msg;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const vinf::ConfigError& e) {
        set_error(e.what());
        return VINF_ERR_CONFIG;
    } catch (const vinf::IoError& e) {
        set_error(e.what());
        return VINF_ERR_IO;
    } catch (const vinf::ShapeError& e) {
        set_error(e.what());
        return VINF_ERR_INVALID;
    } catch (const vinf::RangeError& e) {
        set_error(e.what());
        return VINF_ERR_INVALID;
    } catch (const vinf::TransportError& e) {  // covers ProtocolError
        set_error(e.what());
        return VINF_ERR_TRANSPORT;
    } catch (const std::exception& e) {
        set_error(e.what());
        return VINF_ERR;
    } catch (...) {
        set_error("unknown error");
        return VINF_ERR;
    }
}

int fill_text(const std::string& text, char* buf, size_t cap, size_t* needed) {
    if (needed) *needed = text.size();
    if (buf && cap > 0) {
        const size_t n = text.size() < cap - 1 ? text.size() : cap - 1;
        std::memcpy(buf, text.data(), n);
        buf[n] = '\0';
    }
    return VINF_OK;
}

}  // namespace

struct vinf_config {
    vinf::RunConfig cfg;
};

extern "C" {

const char* vinf_version(void) {
    return "1.0.0";
}

const char* vinf_last_error(void) {
    return g_last_error.c_str();
}

int vinf_config_create(vinf_config** out) {
    if (!out) {
        set_error("vinf_config_create: out is NULL");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        *out = new vinf_config();
        return VINF_OK;
    });
}

void vinf_config_destroy(vinf_config* cfg) {
    delete cfg;
}

int vinf_config_load_file(vinf_config* cfg, const char* path) {
    if (!cfg || !path) {
        set_error("vinf_config_load_file: NULL argument");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        cfg->cfg = vinf::load_config_file(path);
        return VINF_OK;
    });
}

int vinf_config_set(vinf_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) {
        set_error("vinf_config_set: NULL argument");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        vinf::apply_config_set(cfg->cfg, key, value);
        return VINF_OK;
    });
}

int vinf_config_validate(const vinf_config* cfg) {
    if (!cfg) {
        set_error("vinf_config_validate: cfg is NULL");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        vinf::validate_config(cfg->cfg);
        return VINF_OK;
    });
}

int vinf_config_digest(const vinf_config* cfg, uint64_t* digest_out) {
    if (!cfg || !digest_out) {
        set_error("vinf_config_digest: NULL argument");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        *digest_out = vinf::config_digest(cfg->cfg);
        return VINF_OK;
    });
}

int vinf_config_canonical(const vinf_config* cfg, char* buf, size_t cap, size_t* needed) {
    if (!cfg) {
        set_error("vinf_config_canonical: cfg is NULL");
        return VINF_ERR_INVALID;
    }
    return guarded(
        [&] { return fill_text(vinf::canonical_config_text(cfg->cfg), buf, cap, needed); });
}

int vinf_run(const vinf_config* cfg, const char* out_path, const char* metrics_path,
             double* wall_seconds_out) {
    if (!cfg) {
        set_error("vinf_run: cfg is NULL");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        vinf::RunResult res = vinf::execute_run(cfg->cfg);
        if (res.violations > 0) {
            set_error("validating transport observed " + std::to_string(res.violations) +
                      " exclusivity violations");
            return VINF_ERR_TRANSPORT;
        }
        vinf::write_run_outputs(cfg->cfg, res, out_path ? out_path : "",
                                metrics_path ? metrics_path : "");
        if (wall_seconds_out) *wall_seconds_out = res.wall_seconds;
        return VINF_OK;
    });
}

int vinf_verify(const char* dump_a, const char* dump_b, double tolerance, double* max_diff_out,
                uint64_t* mismatch_count_out) {
    if (!dump_a || !dump_b) {
        set_error("vinf_verify: NULL path");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        const vinf::Tensor a = vinf::read_tensor_dump(dump_a);
        const vinf::Tensor b = vinf::read_tensor_dump(dump_b);
        if (!(a.dims() == b.dims())) {
            set_error("shape mismatch between '" + std::string(dump_a) + "' and '" +
                      std::string(dump_b) + "'");
            return VINF_ERR_INVALID;
        }
        double max_diff = 0.0;
        uint64_t mismatches = 0;
        const float* pa = a.data();
        const float* pb = b.data();
        for (size_t i = 0; i < a.size(); ++i) {
            const double d = std::abs(double(pa[i]) - double(pb[i]));
            if (d > max_diff) max_diff = d;
            if (d > tolerance) ++mismatches;
        }
        if (max_diff_out) *max_diff_out = max_diff;
        if (mismatch_count_out) *mismatch_count_out = mismatches;
        if (mismatches > 0) {
            set_error("dumps differ beyond tolerance");
            return VINF_ERR;
        }
        return VINF_OK;
    });
}

int vinf_bench(const vinf_config* cfg, const uint32_t* sweep, size_t sweep_len,
               const char* metrics_path, char* table_buf, size_t table_cap,
               size_t* table_needed) {
    if (!cfg || (sweep_len > 0 && !sweep)) {
        set_error("vinf_bench: NULL argument");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        const std::vector<uint32_t> counts(sweep, sweep + sweep_len);
        const std::vector<vinf::BenchRow> rows =
            vinf::run_bench(cfg->cfg, counts, metrics_path ? metrics_path : "");
        return fill_text(vinf::bench_table_text(rows), table_buf, table_cap, table_needed);
    });
}

int vinf_validate_schedule(uint32_t workers, int literal_order, int* completed_out,
                           uint32_t* rounds_out, uint64_t* transfers_out, char* cycle_buf,
                           size_t cycle_cap) {
    if (workers == 0) {
        set_error("vinf_validate_schedule: workers must be >= 1");
        return VINF_ERR_INVALID;
    }
    return guarded([&] {
        const vinf::Schedule s = literal_order ? vinf::build_literal_pair_schedule(workers)
                                               : vinf::build_sync_schedule(workers, true, true);
        const vinf::ScheduleVerdict v = vinf::validate_schedule(s);
        if (completed_out) *completed_out = v.completed ? 1 : 0;
        if (rounds_out) *rounds_out = v.rounds;
        if (transfers_out) *transfers_out = v.transfers;
        std::string cycle;
        for (size_t i = 0; i < v.cycle.size(); ++i) {
            if (i) cycle += " -> ";
            cycle += std::to_string(v.cycle[i]);
        }
        if (!v.cycle.empty()) cycle += " -> " + std::to_string(v.cycle.front());
        return fill_text(cycle, cycle_buf, cycle_cap, nullptr);
    });
}

}  // extern "C"
