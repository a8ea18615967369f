#ifndef COBRA_TENSOR_HPP
#define COBRA_TENSOR_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cobra/errors.hpp"

namespace cobra {

// Dense N-D array of 32-bit reals, contiguous row-major, last axis fastest.
// Network activations use the canonical layout (channels, depth, height, width).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> dims, float fill = 0.0f)
        : dims_(std::move(dims)), data_(checked_numel(dims_), fill) {}

    static Tensor from_data(std::vector<int64_t> dims, std::vector<float> data) {
        Tensor t;
        if (checked_numel(dims) != static_cast<int64_t>(data.size()))
            throw validation_error("tensor: data length does not match dims");
        t.dims_ = std::move(dims);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int64_t>& dims() const { return dims_; }
    int64_t dim(size_t i) const { return dims_.at(i); }
    size_t rank() const { return dims_.size(); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    // 4D accessor for (C, D, H, W) tensors.
    float& at(int64_t c, int64_t z, int64_t y, int64_t x) {
        return data_[((c * dims_[1] + z) * dims_[2] + y) * dims_[3] + x];
    }
    float at(int64_t c, int64_t z, int64_t y, int64_t x) const {
        return data_[((c * dims_[1] + z) * dims_[2] + y) * dims_[3] + x];
    }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

private:
    static int64_t checked_numel(const std::vector<int64_t>& dims) {
        if (dims.empty()) throw validation_error("tensor: dims must be non-empty");
        int64_t n = 1;
        for (int64_t d : dims) {
            if (d < 1) throw validation_error("tensor: all dims must be >= 1");
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> dims_;
    std::vector<float> data_;
};

}  // namespace cobra

#endif
