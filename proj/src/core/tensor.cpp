#include "core/tensor.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "core/rng.hpp"

namespace vinf {

namespace {
thread_local AllocCounter* tls_counter = nullptr;
}

AllocScope::AllocScope(AllocCounter* counter) : prev_(tls_counter) {
    tls_counter = counter;
}

AllocScope::~AllocScope() {
    tls_counter = prev_;
}

void validate_dims(const Dims& dims) {
    if (dims.f == 0 || dims.h == 0 || dims.w == 0 || dims.c == 0) {
        throw ShapeError("invalid shape: all dims must be >= 1, got F=" + std::to_string(dims.f) +
                         " H=" + std::to_string(dims.h) + " W=" + std::to_string(dims.w) +
                         " C=" + std::to_string(dims.c));
    }
}

Tensor::Tensor(const Dims& dims) : dims_(dims) {
    validate_dims(dims);
    data_.assign(dims.total(), 0.0f);
    acquire();
}

Tensor::Tensor(const Dims& dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    validate_dims(dims);
    if (data_.size() != dims.total()) {
        throw ShapeError("invalid shape: data length " + std::to_string(data_.size()) +
                         " does not equal F*H*W*C = " + std::to_string(dims.total()));
    }
    acquire();
}

Tensor::Tensor(const Tensor& other) : dims_(other.dims_), data_(other.data_) {
    acquire();
}

Tensor::Tensor(Tensor&& other) noexcept
    : dims_(other.dims_), data_(std::move(other.data_)), counter_(other.counter_) {
    other.dims_ = Dims{};
    other.data_.clear();
    other.counter_ = nullptr;
}

Tensor& Tensor::operator=(const Tensor& other) {
    if (this != &other) {
        release();
        dims_ = other.dims_;
        data_ = other.data_;
        acquire();
    }
    return *this;
}

Tensor& Tensor::operator=(Tensor&& other) noexcept {
    if (this != &other) {
        release();
        dims_ = other.dims_;
        data_ = std::move(other.data_);
        counter_ = other.counter_;
        other.dims_ = Dims{};
        other.data_.clear();
        other.counter_ = nullptr;
    }
    return *this;
}

Tensor::~Tensor() {
    release();
}

void Tensor::acquire() {
    counter_ = tls_counter;
    if (counter_ && !data_.empty()) counter_->on_alloc(int64_t(data_.size()));
}

void Tensor::release() {
    if (counter_ && !data_.empty()) counter_->on_free(int64_t(data_.size()));
    counter_ = nullptr;
}

Tensor tensor_from_seed(const Dims& dims, uint64_t seed) {
    return tensor_from_seed_at(dims, seed, 0);
}

Tensor tensor_from_seed_at(const Dims& dims, uint64_t seed, uint64_t first_elem) {
    validate_dims(dims);
    // SplitMix64's state after k draws is seed + k*increment, so the stream
    // can be entered at any offset without drawing the prefix.
    SeededRng rng(seed + first_elem * 0x9E3779B97F4A7C15ull);
    std::vector<float> data(dims.total());
    for (float& v : data) v = rng.next_unit();
    return Tensor(dims, std::move(data));
}

Tensor slice_frames(const Tensor& t, FrameRange r) {
    if (r.len == 0 || r.start > t.dims().f || r.len > t.dims().f - r.start) {
        throw RangeError("frame range out of bounds: start=" + std::to_string(r.start) +
                         " len=" + std::to_string(r.len) + " F=" + std::to_string(t.dims().f));
    }
    Dims d = t.dims();
    d.f = r.len;
    std::vector<float> data(d.total());
    std::memcpy(data.data(), t.frame(r.start), d.total() * sizeof(float));
    return Tensor(d, std::move(data));
}

Tensor concat_frames(const std::vector<const Tensor*>& parts) {
    std::vector<const Tensor*> nonempty;
    nonempty.reserve(parts.size());
    for (const Tensor* p : parts) {
        if (p && !p->empty()) nonempty.push_back(p);
    }
    if (nonempty.empty()) {
        throw ShapeError("concat_frames: no frames to concatenate");
    }
    Dims d = nonempty.front()->dims();
    uint64_t frames = 0;
    for (const Tensor* p : nonempty) {
        const Dims& pd = p->dims();
        if (pd.h != d.h || pd.w != d.w || pd.c != d.c) {
            throw ShapeError("concat_frames: per-frame shape mismatch");
        }
        frames += pd.f;
    }
    d.f = static_cast<uint32_t>(frames);
    std::vector<float> data(d.total());
    size_t off = 0;
    for (const Tensor* p : nonempty) {
        std::memcpy(data.data() + off, p->data(), p->size() * sizeof(float));
        off += p->size();
    }
    return Tensor(d, std::move(data));
}

Tensor concat_frames(const std::vector<Tensor>& parts) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(parts.size());
    for (const Tensor& p : parts) ptrs.push_back(&p);
    return concat_frames(ptrs);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!(a.dims() == b.dims())) {
        throw ShapeError("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    const float* pa = a.data();
    const float* pb = b.data();
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(double(pa[i]) - double(pb[i]));
        if (d > m) m = d;
    }
    return m;
}

}  // namespace vinf
