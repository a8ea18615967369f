#ifndef COBRA_KERNELS_HPP
#define COBRA_KERNELS_HPP

#include <array>
#include <cstdint>
#include <optional>

#include "cobra/tensor.hpp"
#include "cobra/thread_pool.hpp"

namespace cobra {

// Convolution hyperparameters, axis order (z, y, x).
struct ConvSpec {
    std::array<int64_t, 3> kernel{1, 1, 1};
    std::array<int64_t, 3> stride{1, 1, 1};
    std::array<int64_t, 3> pad{0, 0, 0};
    int64_t in_channels = 1;
    int64_t out_channels = 1;
    bool bias = true;

    void validate() const;
    bool operator==(const ConvSpec&) const = default;
};

// floor((in + 2p - k) / s) + 1 per axis; throws if any extent < 1.
std::array<int64_t, 3> conv_output_shape(const ConvSpec& spec,
                                         const std::array<int64_t, 3>& in);
// (in - 1) * s - 2p + k per axis; throws if any extent < 1.
std::array<int64_t, 3> conv_transpose_output_shape(const ConvSpec& spec,
                                                   const std::array<int64_t, 3>& in);

// Lightweight 4D views used by the executor to run kernels inside planned
// buffers. c/d/h/w mirror the (channels, depth, height, width) layout.
struct ConstView4 {
    const float* p;
    int64_t c, d, h, w;
};
struct View4 {
    float* p;
    int64_t c, d, h, w;
};

// Reference cross-correlation: a plain 7-nested-loop walk, bit-identical
// across runs. Every optimized convolution path is tested against it.
// x: (Cin, D, H, W); w: (Cout, Cin, kz, ky, kx); b: (Cout) or null.
Tensor conv3d_direct(const Tensor& x, const Tensor& w, const Tensor* b,
                     const ConvSpec& spec);

// Optimized convolution. Dedicated paths for 1x1x1, kx1x1, 1xkx1, 1x1xk
// kernels and strided variants; falls back to a blocked general path.
// Accumulation order per output voxel is fixed (ic, kz, ky, kx), so results
// are bit-identical for any thread count.
Tensor conv3d_fast(const Tensor& x, const Tensor& w, const Tensor* b,
                   const ConvSpec& spec, ThreadPool* pool = nullptr,
                   bool fuse_relu = false);
void conv3d_fast_into(ConstView4 x, const float* w, const float* b,
                      const ConvSpec& spec, View4 out, ThreadPool* pool,
                      bool fuse_relu);

// Transpose convolution (gradient-of-convolution semantics), gather
// formulation. w: (Cin, Cout, kz, ky, kx).
Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor* b,
                        const ConvSpec& spec, ThreadPool* pool = nullptr);
void conv_transpose3d_into(ConstView4 x, const float* w, const float* b,
                           const ConvSpec& spec, View4 out, ThreadPool* pool);

Tensor relu(const Tensor& x);
// y must either match x's shape or be a per-channel vector of shape (C) or
// (C,1,1,1) broadcast over a (C,D,H,W) x.
Tensor add(const Tensor& x, const Tensor& y);
Tensor concat_channels(const Tensor& x, const Tensor& y);

void relu_into(View4 out, ConstView4 x, ThreadPool* pool = nullptr);
void add_into(View4 out, ConstView4 x, ConstView4 y, ThreadPool* pool = nullptr);
void concat_into(View4 out, ConstView4 x, ConstView4 y);

// He normal initialization for a conv weight tensor (Cout, Cin, kz, ky, kx):
// Normal(0, sqrt(2 / fan_in)) with fan_in = Cin*kz*ky*kx, deterministic in
// the seed (see rng.hpp). Biases are zero-initialized by the graph builder.
Tensor he_normal_init(const ConvSpec& spec, uint64_t seed);

}  // namespace cobra

#endif
