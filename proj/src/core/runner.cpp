#include "core/runner.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>

#include "core/clip_parallel.hpp"
#include "core/pipeline.hpp"
#include "core/tensor_io.hpp"
#include "core/transport_inproc.hpp"
#include "core/transport_tcp.hpp"

namespace vinf {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunResult run_sequential(const RunConfig& cfg, const Model& model) {
    RunResult res;
    AllocCounter counter;
    WorkerMetrics wm;
    Tensor x;
    {
        AllocScope scope(&counter);
        x = tensor_from_seed(cfg.dims(), cfg.seed);
        x = denoise_sequential(x, model, cfg.denoise_config(), &wm);
    }
    wm.peak_live_elems = counter.peak.load();
    x.detach_counter();
    res.x0 = std::move(x);
    res.workers.push_back(wm);
    return res;
}

RunResult run_inproc(const RunConfig& cfg, const Model& model) {
    const ClipPlan plan = make_plan(cfg.frames, cfg.workers);
    check_halo_constraints(cfg.model_config(), plan.f_clip);
    const uint32_t n = cfg.workers;
    const uint64_t frame_elems = cfg.dims().frame_elems();
    const auto ablate = cfg.ablate_kind();

    std::vector<AllocCounter> counters(n);
    std::vector<WorkerMetrics> wms(n);
    std::vector<Tensor> results(n);

    InprocRunResult rr = run_inproc_workers(n, cfg.validating, [&](Transport& tr) {
        const uint32_t i = tr.rank();
        AllocScope scope(&counters[i]);
        Dims cd = cfg.dims();
        cd.f = plan.f_clip;
        Tensor clip =
            tensor_from_seed_at(cd, cfg.seed, uint64_t(plan.ranges[i].start) * frame_elems);
        Tensor out = worker_denoise(tr, plan, std::move(clip), model, cfg.denoise_config(),
                                    &wms[i], ablate);
        wms[i].peak_live_elems = counters[i].peak.load();
        out.detach_counter();
        results[i] = std::move(out);
    });

    RunResult res;
    res.x0 = concat_frames(results);
    res.workers = std::move(wms);
    res.violations = rr.violations;
    return res;
}

// ---- TCP: coordinator forks one process per worker ----

constexpr uint32_t kCoordinatorAddr = 0xFFFFFFFFu;

void tcp_worker_main(const RunConfig& cfg, const Model& model, const std::string& host,
                     uint16_t port, uint64_t digest) {
    WorkerLink link = tcp_worker_connect(host, port, digest);
    const ClipPlan plan = make_plan(cfg.frames, cfg.workers);
    const uint64_t frame_elems = cfg.dims().frame_elems();

    AllocCounter counter;
    WorkerMetrics wm;
    Tensor out;
    {
        AllocScope scope(&counter);
        Dims cd = cfg.dims();
        cd.f = plan.f_clip;
        Tensor clip =
            tensor_from_seed_at(cd, cfg.seed, uint64_t(plan.ranges[link.id].start) * frame_elems);
        out = worker_denoise(*link.transport, plan, std::move(clip), model, cfg.denoise_config(),
                             &wm, cfg.ablate_kind());
    }
    wm.peak_live_elems = counter.peak.load();
    out.detach_counter();

    Envelope renv;
    renv.type = MsgType::Control;
    renv.tag = digest;
    renv.src = link.id;
    renv.dst = kCoordinatorAddr;
    renv.payload.resize(out.size() * sizeof(float));
    std::memcpy(renv.payload.data(), out.data(), renv.payload.size());
    send_envelope_fd(link.coordinator_fd, renv);

    Envelope menv;
    menv.type = MsgType::Control;
    menv.tag = digest;
    menv.src = link.id;
    menv.dst = kCoordinatorAddr;
    menv.payload = worker_metrics_to_bytes(wm);
    send_envelope_fd(link.coordinator_fd, menv);

    close(link.coordinator_fd);
}

Envelope recv_result_envelope(int fd, uint32_t worker, uint64_t digest) {
    Envelope env = recv_envelope_fd(fd);
    if (env.type != MsgType::Control || env.tag != digest || env.src != worker ||
        env.dst != kCoordinatorAddr) {
        throw ProtocolError("unexpected result message from worker " + std::to_string(worker));
    }
    return env;
}

RunResult run_tcp(const RunConfig& cfg, const Model& model) {
    const ClipPlan plan = make_plan(cfg.frames, cfg.workers);
    check_halo_constraints(cfg.model_config(), plan.f_clip);
    const uint32_t n = cfg.workers;
    const uint64_t digest = config_digest(cfg);

    auto [host, port] = split_host_port(cfg.listen);
    uint16_t bound = 0;
    const int listen_fd = tcp_listen(host, port, &bound);

    std::vector<pid_t> pids;
    pids.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        const pid_t pid = fork();
        if (pid < 0) {
            const int err = errno;
            for (pid_t p : pids) kill(p, SIGKILL);
            for (pid_t p : pids) waitpid(p, nullptr, 0);
            close(listen_fd);
            throw TransportError(std::string("fork failed: ") + strerror(err));
        }
        if (pid == 0) {
            close(listen_fd);
            int code = 0;
            try {
                tcp_worker_main(cfg, model, host, bound, digest);
            } catch (const std::exception& e) {
                fprintf(stderr, "worker process error: %s\n", e.what());
                code = 3;
            }
            _exit(code);
        }
        pids.push_back(pid);
    }

    RunResult res;
    try {
        std::vector<int> fds = tcp_coordinator_accept(listen_fd, n, digest);
        close(listen_fd);

        Dims cd = cfg.dims();
        cd.f = plan.f_clip;
        const size_t clip_bytes = size_t(cd.total()) * sizeof(float);

        std::vector<Tensor> clips;
        clips.reserve(n);
        for (uint32_t i = 0; i < n; ++i) {
            Envelope renv = recv_result_envelope(fds[i], i, digest);
            if (renv.payload.size() != clip_bytes) {
                throw ProtocolError("result payload from worker " + std::to_string(i) + " is " +
                                    std::to_string(renv.payload.size()) + " bytes, expected " +
                                    std::to_string(clip_bytes));
            }
            std::vector<float> data(cd.total());
            std::memcpy(data.data(), renv.payload.data(), clip_bytes);
            clips.emplace_back(cd, std::move(data));

            Envelope menv = recv_result_envelope(fds[i], i, digest);
            res.workers.push_back(worker_metrics_from_bytes(menv.payload.data(),
                                                            menv.payload.size()));
            close(fds[i]);
        }
        res.x0 = concat_frames(clips);
    } catch (...) {
        for (pid_t p : pids) kill(p, SIGKILL);
        for (pid_t p : pids) waitpid(p, nullptr, 0);
        throw;
    }

    for (uint32_t i = 0; i < n; ++i) {
        int status = 0;
        if (waitpid(pids[i], &status, 0) < 0) {
            throw TransportError("waitpid failed for worker " + std::to_string(i));
        }
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
            throw TransportError("worker process " + std::to_string(i) +
                                 " exited abnormally (status " + std::to_string(status) + ")");
        }
    }
    return res;
}

}  // namespace

RunResult execute_run(const RunConfig& cfg) {
    validate_config(cfg);
    const Model model = build_model(cfg.model_config());
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    if (cfg.sequential) {
        res = run_sequential(cfg, model);
    } else if (cfg.transport == "inproc") {
        res = run_inproc(cfg, model);
    } else {
        res = run_tcp(cfg, model);
    }
    res.wall_seconds = seconds_since(t0);
    return res;
}

void write_run_outputs(const RunConfig& cfg, const RunResult& res, const std::string& out_path,
                       const std::string& metrics_path, const std::string& label) {
    if (!out_path.empty()) write_tensor_dump(out_path, res.x0);
    if (!metrics_path.empty()) {
        RunRecordInfo info;
        info.digest = config_digest(cfg);
        info.workers = cfg.sequential ? 1 : cfg.workers;
        info.transport = cfg.sequential ? "sequential" : cfg.transport;
        info.label = label;
        info.steps = cfg.steps;
        info.wall_seconds = res.wall_seconds;
        append_metrics_records(metrics_path, info, res.workers);
    }
}

namespace {

BenchRow make_row(const std::string& label, const RunConfig& cfg, const RunResult& r,
                  double base_wall, const Tensor& baseline) {
    BenchRow row;
    row.label = label;
    row.workers = cfg.sequential ? 1 : cfg.workers;
    row.wall_seconds = r.wall_seconds;
    row.speedup = r.wall_seconds > 0.0 ? base_wall / r.wall_seconds : 0.0;
    for (const WorkerMetrics& m : r.workers) {
        row.conv_bytes += m.conv.bytes_sent;
        row.groupnorm_bytes += m.groupnorm.bytes_sent;
        row.attention_bytes += m.attention.bytes_sent;
    }
    row.max_diff = max_abs_diff(r.x0, baseline);
    // Rounding drift across reduction orders scales with step count; anything
    // past this is a real numerical divergence, not noise.
    row.diverged = row.max_diff > double(cfg.steps) * 1e-5;
    return row;
}

}  // namespace

std::vector<BenchRow> run_bench(const RunConfig& base, const std::vector<uint32_t>& sweep,
                                const std::string& metrics_path) {
    RunConfig seq = base;
    seq.sequential = true;
    seq.workers = 1;
    seq.ablate = "none";
    RunResult bres = execute_run(seq);
    const double base_wall = bres.wall_seconds;
    write_run_outputs(seq, bres, "", metrics_path, "bench sequential");

    std::vector<BenchRow> rows;
    rows.push_back(make_row("sequential", seq, bres, base_wall, bres.x0));

    static const LayerKind kKinds[] = {LayerKind::Conv, LayerKind::GroupNorm,
                                       LayerKind::Attention};
    for (uint32_t n : sweep) {
        RunConfig cfg = base;
        cfg.sequential = false;
        cfg.workers = n;
        cfg.ablate = "none";
        const std::string label = "n=" + std::to_string(n);
        RunResult r = execute_run(cfg);
        write_run_outputs(cfg, r, "", metrics_path, "bench " + label);
        rows.push_back(make_row(label, cfg, r, base_wall, bres.x0));

        if (n <= 1) continue;  // without peers, skipping sync changes nothing
        for (LayerKind k : kKinds) {
            RunConfig acfg = cfg;
            acfg.ablate = layer_kind_name(k);
            const std::string alabel = label + " -" + layer_kind_name(k) + "-sync";
            RunResult ar = execute_run(acfg);
            write_run_outputs(acfg, ar, "", metrics_path, "bench " + alabel);
            rows.push_back(make_row(alabel, acfg, ar, base_wall, bres.x0));
        }
    }
    return rows;
}

std::string bench_table_text(const std::vector<BenchRow>& rows) {
    std::string out;
    char buf[256];
    snprintf(buf, sizeof(buf), "%-28s %7s %9s %8s %12s %12s %12s %10s %8s\n", "label", "workers",
             "wall_s", "speedup", "conv_B", "gnorm_B", "attn_B", "max_diff", "diverged");
    out += buf;
    for (const BenchRow& r : rows) {
        snprintf(buf, sizeof(buf),
                 "%-28s %7u %9.3f %8.2f %12llu %12llu %12llu %10.3g %8s\n", r.label.c_str(),
                 r.workers, r.wall_seconds, r.speedup, (unsigned long long)r.conv_bytes,
                 (unsigned long long)r.groupnorm_bytes, (unsigned long long)r.attention_bytes,
                 r.max_diff, r.diverged ? "yes" : "no");
        out += buf;
    }
    return out;
}

}  // namespace vinf
