// Command-line front end. Talks to the runtime exclusively through the C API
// in vinf.h, which keeps it an honest consumer of the public surface.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vinf.h"

namespace {

struct ConfigDeleter {
    void operator()(vinf_config* c) const { vinf_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<vinf_config, ConfigDeleter>;

int fail(int status) {
    fprintf(stderr, "error: %s\n", vinf_last_error());
    return status;
}

// Shared --config/--set/--workers/... handling for run and bench.
struct ConfigArgs {
    std::string config_file;
    std::vector<std::string> sets;
    uint32_t workers = 0;
    std::string transport;
    std::string listen;
    bool validating = false;
    bool sequential = false;

    CLI::Option* workers_opt = nullptr;
    CLI::Option* transport_opt = nullptr;
    CLI::Option* listen_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "key=value config file");
        cmd->add_option("--set", sets, "override one config key (key=value, repeatable)");
        workers_opt = cmd->add_option("--workers", workers, "worker count");
        transport_opt =
            cmd->add_option("--transport", transport, "inproc or tcp")->check(CLI::IsMember({"inproc", "tcp"}));
        listen_opt = cmd->add_option("--listen", listen, "coordinator address host:port (tcp)")
                         ->envname("VINF_LISTEN");
        cmd->add_flag("--validating", validating, "check transport exclusivity during the run");
        cmd->add_flag("--sequential", sequential, "run the single-process reference path");
    }

    // Build the config: file first, then --set pairs, then dedicated flags.
    int build(ConfigPtr& out) const {
        vinf_config* raw = nullptr;
        int rc = vinf_config_create(&raw);
        if (rc != VINF_OK) return rc;
        out.reset(raw);
        if (!config_file.empty()) {
            rc = vinf_config_load_file(raw, config_file.c_str());
            if (rc != VINF_OK) return rc;
        }
        for (const std::string& kv : sets) {
            const size_t eq = kv.find('=');
            if (eq == std::string::npos) {
                fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
                return VINF_ERR_CONFIG;
            }
            rc = vinf_config_set(raw, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
            if (rc != VINF_OK) return rc;
        }
        if (workers_opt && workers_opt->count() > 0) {
            rc = vinf_config_set(raw, "workers", std::to_string(workers).c_str());
            if (rc != VINF_OK) return rc;
        }
        if (transport_opt && transport_opt->count() > 0) {
            rc = vinf_config_set(raw, "transport", transport.c_str());
            if (rc != VINF_OK) return rc;
        }
        if (listen_opt && listen_opt->count() > 0) {
            rc = vinf_config_set(raw, "listen", listen.c_str());
            if (rc != VINF_OK) return rc;
        }
        if (validating) {
            rc = vinf_config_set(raw, "validating", "true");
            if (rc != VINF_OK) return rc;
        }
        if (sequential) {
            rc = vinf_config_set(raw, "sequential", "true");
            if (rc != VINF_OK) return rc;
        }
        return vinf_config_validate(raw);
    }
};

std::string canonical_text(const vinf_config* cfg) {
    size_t needed = 0;
    vinf_config_canonical(cfg, nullptr, 0, &needed);
    std::string text(needed + 1, '\0');
    vinf_config_canonical(cfg, text.data(), text.size(), nullptr);
    text.resize(needed);
    return text;
}

int cmd_run(const ConfigArgs& args, const std::string& out_path, const std::string& metrics_path,
            bool print_config) {
    ConfigPtr cfg;
    int rc = args.build(cfg);
    if (rc != VINF_OK) return fail(rc);

    uint64_t digest = 0;
    vinf_config_digest(cfg.get(), &digest);
    if (print_config) fputs(canonical_text(cfg.get()).c_str(), stdout);

    double wall = 0.0;
    rc = vinf_run(cfg.get(), out_path.empty() ? nullptr : out_path.c_str(),
                  metrics_path.empty() ? nullptr : metrics_path.c_str(), &wall);
    if (rc != VINF_OK) return fail(rc);

    printf("run ok digest=0x%016" PRIx64 " wall_s=%.3f", digest, wall);
    if (!out_path.empty()) printf(" out=%s", out_path.c_str());
    if (!metrics_path.empty()) printf(" metrics=%s", metrics_path.c_str());
    printf("\n");
    return 0;
}

int cmd_verify(const std::string& a, const std::string& b, double tolerance) {
    double max_diff = 0.0;
    uint64_t mismatches = 0;
    const int rc = vinf_verify(a.c_str(), b.c_str(), tolerance, &max_diff, &mismatches);
    if (rc == VINF_OK || rc == VINF_ERR) {
        printf("max_abs_diff=%.9g mismatches=%" PRIu64 " tolerance=%.9g => %s\n", max_diff,
               mismatches, tolerance, rc == VINF_OK ? "OK" : "FAIL");
        return rc == VINF_OK ? 0 : 1;
    }
    fprintf(stderr, "error: %s\n", vinf_last_error());
    return 2;  // dumps unreadable or shapes incomparable
}

int cmd_bench(const ConfigArgs& args, std::vector<uint32_t> sweep,
              const std::string& metrics_path) {
    ConfigPtr cfg;
    int rc = args.build(cfg);
    if (rc != VINF_OK) return fail(rc);

    // One call only (each call re-times the sweep), so size the buffer for
    // far more rows than a sweep can produce instead of asking twice.
    std::string table(1 << 16, '\0');
    size_t needed = 0;
    rc = vinf_bench(cfg.get(), sweep.data(), sweep.size(),
                    metrics_path.empty() ? nullptr : metrics_path.c_str(), table.data(),
                    table.size(), &needed);
    if (rc != VINF_OK) return fail(rc);
    table.resize(needed < table.size() ? needed : table.size() - 1);
    fputs(table.c_str(), stdout);
    return 0;
}

int cmd_validate_schedule(uint32_t workers, bool literal) {
    int completed = 0;
    uint32_t rounds = 0;
    uint64_t transfers = 0;
    char cycle[512] = {0};
    const int rc = vinf_validate_schedule(workers, literal ? 1 : 0, &completed, &rounds,
                                          &transfers, cycle, sizeof(cycle));
    if (rc != VINF_OK) return fail(rc);
    if (completed) {
        printf("schedule ok workers=%u rounds=%u transfers=%" PRIu64 "\n", workers, rounds,
               transfers);
        return 0;
    }
    printf("schedule deadlocks workers=%u after %u rounds (%" PRIu64 " transfers)%s%s\n", workers,
           rounds, transfers, cycle[0] ? " cycle: " : "", cycle);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clip-parallel denoising runtime"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(vinf_version()));

    // run
    auto* run = app.add_subcommand("run", "execute a denoising run");
    ConfigArgs run_args;
    run_args.attach(run);
    std::string run_out, run_metrics;
    bool run_print_config = false;
    run->add_option("--out", run_out, "write the result tensor dump here");
    run->add_option("--metrics", run_metrics, "append metrics records here");
    run->add_flag("--print-config", run_print_config, "print the canonical config first");

    // verify
    auto* verify = app.add_subcommand("verify", "compare two tensor dumps");
    std::string dump_a, dump_b;
    double tolerance = 1e-5;
    verify->add_option("a", dump_a, "first dump")->required();
    verify->add_option("b", dump_b, "second dump")->required();
    verify->add_option("--tolerance", tolerance, "per-element tolerance (default 1e-5)");

    // bench
    auto* bench = app.add_subcommand("bench", "worker sweep with ablation rows");
    ConfigArgs bench_args;
    bench_args.attach(bench);
    std::vector<uint32_t> sweep;
    std::string bench_metrics;
    bench->add_option("--sweep", sweep, "worker counts (e.g. --sweep 1 2 4)")
        ->delimiter(',');
    bench->add_option("--metrics", bench_metrics, "append metrics records here");

    // validate-schedule
    auto* vsched = app.add_subcommand("validate-schedule", "simulate the sync schedule offline");
    uint32_t vs_workers = 4;
    bool vs_literal = false;
    vsched->add_option("--workers", vs_workers, "worker count")->required();
    vsched->add_flag("--literal", vs_literal, "check the published receive-first pair order");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(run_args, run_out, run_metrics, run_print_config);
    if (verify->parsed()) return cmd_verify(dump_a, dump_b, tolerance);
    if (bench->parsed()) {
        if (sweep.empty()) sweep = {1, 2, 4};
        return cmd_bench(bench_args, sweep, bench_metrics);
    }
    if (vsched->parsed()) return cmd_validate_schedule(vs_workers, vs_literal);
    return 0;
}
