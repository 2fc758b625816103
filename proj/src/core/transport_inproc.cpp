#include "core/transport_inproc.hpp"

#include <chrono>
#include <exception>
#include <thread>

namespace vinf {

namespace {
// Generous: must outlast scheduler starvation on loaded machines, but still
// turn an accidental deadlock into a test failure instead of a hang.
constexpr auto kRendezvousTimeout = std::chrono::seconds(120);
}

InprocHub::InprocHub(uint32_t world, bool validating)
    : world_(world), validating_(validating), in_flight_(world, 0) {
    slots_.reserve(size_t(world) * world);
    for (size_t i = 0; i < size_t(world) * world; ++i) {
        slots_.push_back(std::make_unique<Slot>());
    }
}

void InprocHub::check_abort() const {
    if (aborted_.load(std::memory_order_acquire)) {
        std::lock_guard<std::mutex> lk(vmu_);
        throw TransportError("run aborted: " + abort_reason_);
    }
}

void InprocHub::abort_run(const std::string& reason) {
    {
        std::lock_guard<std::mutex> lk(vmu_);
        if (abort_reason_.empty()) abort_reason_ = reason;
    }
    aborted_.store(true, std::memory_order_release);
    for (auto& s : slots_) {
        {
            std::lock_guard<std::mutex> lk(s->m);  // order waiters behind the flag
        }
        s->cv.notify_all();
    }
}

void InprocHub::rendezvous_send(uint32_t src, uint32_t dst, Envelope&& env) {
    Slot& s = slot(src, dst);
    std::unique_lock<std::mutex> lk(s.m);
    const auto stop = [&] { return aborted_.load(std::memory_order_acquire); };
    // Wait for the mailbox to be free (a previous send fully handed over).
    if (!s.cv.wait_for(lk, kRendezvousTimeout, [&] { return stop() || !s.full; })) {
        throw TransportError("rendezvous timeout: worker " + std::to_string(src) +
                             " waiting to send to worker " + std::to_string(dst));
    }
    check_abort();
    s.env = std::move(env);
    s.full = true;
    s.taken = false;
    s.cv.notify_all();
    // Rendezvous: hold until the receiver has accepted.
    if (!s.cv.wait_for(lk, kRendezvousTimeout, [&] { return stop() || s.taken; })) {
        s.full = false;
        throw TransportError("rendezvous timeout: worker " + std::to_string(dst) +
                             " never received from worker " + std::to_string(src));
    }
    if (!s.taken) {
        s.full = false;
        check_abort();
    }
    s.full = false;
    s.taken = false;
    s.cv.notify_all();
}

Envelope InprocHub::rendezvous_recv(uint32_t src, uint32_t dst) {
    Slot& s = slot(src, dst);
    std::unique_lock<std::mutex> lk(s.m);
    const auto stop = [&] { return aborted_.load(std::memory_order_acquire); };
    if (!s.cv.wait_for(lk, kRendezvousTimeout, [&] { return stop() || (s.full && !s.taken); })) {
        throw TransportError("rendezvous timeout: worker " + std::to_string(dst) +
                             " waiting on worker " + std::to_string(src));
    }
    if (!(s.full && !s.taken)) check_abort();
    Envelope env = std::move(s.env);
    s.taken = true;
    s.cv.notify_all();
    return env;
}

void InprocHub::op_begin(uint32_t worker) {
    std::lock_guard<std::mutex> lk(vmu_);
    if (++in_flight_[worker] > 1) {
        ++violations_;
        if (first_violation_.empty()) {
            first_violation_ = "worker " + std::to_string(worker) + " had " +
                               std::to_string(in_flight_[worker]) + " transfers in flight";
        }
    }
}

void InprocHub::op_end(uint32_t worker) {
    std::lock_guard<std::mutex> lk(vmu_);
    --in_flight_[worker];
}

uint64_t InprocHub::violations() const {
    std::lock_guard<std::mutex> lk(vmu_);
    return violations_;
}

std::string InprocHub::first_violation() const {
    std::lock_guard<std::mutex> lk(vmu_);
    return first_violation_;
}

InprocTransport::InprocTransport(InprocHub& hub, uint32_t rank)
    : Transport(rank, hub.world()), hub_(hub) {}

void InprocTransport::do_send(Envelope&& env) {
    const uint32_t dst = env.dst;
    if (hub_.validating()) {
        hub_.op_begin(rank());
        try {
            hub_.rendezvous_send(rank(), dst, std::move(env));
        } catch (...) {
            hub_.op_end(rank());
            throw;
        }
        hub_.op_end(rank());
    } else {
        hub_.rendezvous_send(rank(), dst, std::move(env));
    }
}

Envelope InprocTransport::do_recv(uint32_t src) {
    if (hub_.validating()) {
        hub_.op_begin(rank());
        try {
            Envelope env = hub_.rendezvous_recv(src, rank());
            hub_.op_end(rank());
            return env;
        } catch (...) {
            hub_.op_end(rank());
            throw;
        }
    }
    return hub_.rendezvous_recv(src, rank());
}

InprocRunResult run_inproc_workers(uint32_t n, bool validating,
                                   const std::function<void(Transport&)>& body) {
    InprocHub hub(n, validating);
    std::vector<InprocTransport> endpoints;
    endpoints.reserve(n);
    for (uint32_t i = 0; i < n; ++i) endpoints.emplace_back(hub, i);

    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> first_fail{-1};
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        threads.emplace_back([&, i] {
            try {
                body(endpoints[i]);
            } catch (const std::exception& e) {
                errors[i] = std::current_exception();
                int expected = -1;
                // The first failure is the root cause; it cancels everyone
                // else, whose "run aborted" errors we swallow below.
                if (first_fail.compare_exchange_strong(expected, int(i))) {
                    hub.abort_run(std::string("worker ") + std::to_string(i) +
                                  " failed: " + e.what());
                }
            } catch (...) {
                errors[i] = std::current_exception();
                int expected = -1;
                if (first_fail.compare_exchange_strong(expected, int(i))) {
                    hub.abort_run("worker " + std::to_string(i) + " failed");
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    const int failed = first_fail.load();
    if (failed >= 0) std::rethrow_exception(errors[size_t(failed)]);

    InprocRunResult res;
    res.violations = hub.violations();
    for (const auto& e : endpoints) res.stats.push_back(e.stats());
    return res;
}

}  // namespace vinf
