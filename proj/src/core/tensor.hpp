#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace vinf {

// Shape of a latent tensor: F frames of H x W positions with C channels.
// Storage is row-major with the frame index slowest-varying, so a frame is a
// contiguous block of H*W*C floats and frame-axis slicing is a single copy.
struct Dims {
    uint32_t f = 0;
    uint32_t h = 0;
    uint32_t w = 0;
    uint32_t c = 0;

    size_t frame_elems() const { return size_t(h) * w * c; }
    size_t total() const { return size_t(f) * frame_elems(); }
    bool operator==(const Dims&) const = default;
};

struct FrameRange {
    uint32_t start = 0;
    uint32_t len = 0;
};

// Live/peak element accounting. A worker installs a counter for its thread
// (AllocScope); tensors remember the counter they were charged to so that a
// cross-thread move still credits the right owner on destruction.
struct AllocCounter {
    std::atomic<int64_t> live{0};
    std::atomic<int64_t> peak{0};

    void on_alloc(int64_t n) {
        const int64_t now = live.fetch_add(n) + n;
        int64_t prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
    }
    void on_free(int64_t n) { live.fetch_sub(n); }
    void reset() {
        live.store(0);
        peak.store(0);
    }
};

class AllocScope {
public:
    explicit AllocScope(AllocCounter* counter);
    ~AllocScope();
    AllocScope(const AllocScope&) = delete;
    AllocScope& operator=(const AllocScope&) = delete;

private:
    AllocCounter* prev_;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(const Dims& dims);  // zero-filled; rejects zero dims
    Tensor(const Dims& dims, std::vector<float> data);

    Tensor(const Tensor& other);
    Tensor(Tensor&& other) noexcept;
    Tensor& operator=(const Tensor& other);
    Tensor& operator=(Tensor&& other) noexcept;
    ~Tensor();

    const Dims& dims() const { return dims_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return dims_.f == 0; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float* frame(uint32_t f) { return data_.data() + size_t(f) * dims_.frame_elems(); }
    const float* frame(uint32_t f) const { return data_.data() + size_t(f) * dims_.frame_elems(); }

    // Channel vector at (frame, h, w); contiguous C floats.
    const float* at(uint32_t f, uint32_t h, uint32_t w) const {
        return frame(f) + (size_t(h) * dims_.w + w) * dims_.c;
    }
    float* at(uint32_t f, uint32_t h, uint32_t w) {
        return frame(f) + (size_t(h) * dims_.w + w) * dims_.c;
    }

    // Settle up with the worker's allocation counter now; used when a result
    // tensor outlives the worker scope it was produced in.
    void detach_counter() { release(); }

private:
    void acquire();
    void release();

    Dims dims_{};
    std::vector<float> data_;
    AllocCounter* counter_ = nullptr;
};

// Element i is the i-th value of the SplitMix64 unit-float sequence.
Tensor tensor_from_seed(const Dims& dims, uint64_t seed);

// Same stream, starting at element first_elem. Lets a worker materialize just
// its own frame range: slicing the full seeded tensor and generating the
// slice directly are bitwise identical.
Tensor tensor_from_seed_at(const Dims& dims, uint64_t seed, uint64_t first_elem);

Tensor slice_frames(const Tensor& t, FrameRange r);

Tensor concat_frames(const std::vector<const Tensor*>& parts);
Tensor concat_frames(const std::vector<Tensor>& parts);

double max_abs_diff(const Tensor& a, const Tensor& b);

void validate_dims(const Dims& dims);

}  // namespace vinf
