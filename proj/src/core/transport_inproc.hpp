#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "core/transport.hpp"

namespace vinf {

// Shared-memory backend: one rendezvous mailbox per (src, dst) pair. A send
// blocks until the receiver has taken the message, which makes this the
// strictest backend — any schedule that completes here completes anywhere.
class InprocHub {
public:
    explicit InprocHub(uint32_t world, bool validating = false);

    void rendezvous_send(uint32_t src, uint32_t dst, Envelope&& env);
    Envelope rendezvous_recv(uint32_t src, uint32_t dst);

    // Validating mode: counts moments where one worker had two point-to-point
    // operations in flight (the exclusivity rule). Zero in correct runs.
    void op_begin(uint32_t worker);
    void op_end(uint32_t worker);
    bool validating() const { return validating_; }
    uint64_t violations() const;
    std::string first_violation() const;

    // Wakes every blocked rendezvous with an error so one failed worker takes
    // the whole run down promptly instead of letting peers time out.
    void abort_run(const std::string& reason);

    uint32_t world() const { return world_; }

private:
    struct Slot {
        std::mutex m;
        std::condition_variable cv;
        Envelope env;
        bool full = false;
        bool taken = false;
    };

    Slot& slot(uint32_t src, uint32_t dst) { return *slots_[size_t(src) * world_ + dst]; }
    void check_abort() const;  // throws once abort_run has been called

    uint32_t world_;
    bool validating_;
    std::vector<std::unique_ptr<Slot>> slots_;

    std::atomic<bool> aborted_{false};

    mutable std::mutex vmu_;
    std::vector<int> in_flight_;
    uint64_t violations_ = 0;
    std::string first_violation_;
    std::string abort_reason_;
};

class InprocTransport : public Transport {
public:
    InprocTransport(InprocHub& hub, uint32_t rank);

protected:
    void do_send(Envelope&& env) override;
    Envelope do_recv(uint32_t src) override;

private:
    InprocHub& hub_;
};

// Runs n workers as threads over a fresh hub, joins them, and rethrows the
// first worker failure. Used by the in-process runner and by tests.
struct InprocRunResult {
    std::vector<TransportStats> stats;  // per worker
    uint64_t violations = 0;
};
InprocRunResult run_inproc_workers(uint32_t n, bool validating,
                                   const std::function<void(Transport&)>& body);

}  // namespace vinf
