#include "cobra/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "cobra/rng.hpp"

namespace cobra {

void ConvSpec::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (kernel[a] < 1) throw validation_error("conv spec: kernel components must be >= 1");
        if (stride[a] < 1) throw validation_error("conv spec: stride components must be >= 1");
        if (pad[a] < 0) throw validation_error("conv spec: padding must be >= 0");
    }
    if (in_channels < 1 || out_channels < 1)
        throw validation_error("conv spec: channel counts must be >= 1");
}

std::array<int64_t, 3> conv_output_shape(const ConvSpec& spec,
                                         const std::array<int64_t, 3>& in) {
    spec.validate();
    std::array<int64_t, 3> out{};
    for (int a = 0; a < 3; ++a) {
        out[a] = (in[a] + 2 * spec.pad[a] - spec.kernel[a]) / spec.stride[a] + 1;
        if (in[a] + 2 * spec.pad[a] < spec.kernel[a] || out[a] < 1)
            throw validation_error("conv: output extent < 1 on axis " + std::to_string(a));
    }
    return out;
}

std::array<int64_t, 3> conv_transpose_output_shape(const ConvSpec& spec,
                                                   const std::array<int64_t, 3>& in) {
    spec.validate();
    std::array<int64_t, 3> out{};
    for (int a = 0; a < 3; ++a) {
        out[a] = (in[a] - 1) * spec.stride[a] - 2 * spec.pad[a] + spec.kernel[a];
        if (out[a] < 1)
            throw validation_error("conv_transpose: output extent < 1 on axis " + std::to_string(a));
    }
    return out;
}

namespace {

void check_conv_operands(const Tensor& x, const Tensor& w, const Tensor* b,
                         const ConvSpec& spec, bool transpose) {
    if (x.rank() != 4) throw validation_error("conv: input must be 4D (C,D,H,W)");
    if (w.rank() != 5) throw validation_error("conv: weight must be 5D");
    const int64_t wc_in = transpose ? w.dim(0) : w.dim(1);
    const int64_t wc_out = transpose ? w.dim(1) : w.dim(0);
    if (x.dim(0) != spec.in_channels || wc_in != spec.in_channels ||
        wc_out != spec.out_channels)
        throw validation_error("conv: channel mismatch between input, weight and spec");
    if (w.dim(2) != spec.kernel[0] || w.dim(3) != spec.kernel[1] || w.dim(4) != spec.kernel[2])
        throw validation_error("conv: weight kernel dims do not match spec");
    if (spec.bias) {
        if (!b || b->rank() != 1 || b->dim(0) != spec.out_channels)
            throw validation_error("conv: bias must be (Cout)");
    }
}

// Valid output range [lo, hi) on one axis for input index i = o*s + k - p.
inline void tap_bounds(int64_t off, int64_t s, int64_t in_extent, int64_t out_extent,
                       int64_t& lo, int64_t& hi) {
    lo = off < 0 ? (-off + s - 1) / s : 0;
    const int64_t lim = in_extent - off;  // need o*s < lim
    hi = lim <= 0 ? 0 : std::min(out_extent, (lim - 1) / s + 1);
    if (hi < lo) hi = lo;
}

struct ConvDims {
    int64_t D, H, W;     // input spatial
    int64_t OD, OH, OW;  // output spatial
};

}  // namespace

Tensor conv3d_direct(const Tensor& x, const Tensor& w, const Tensor* b,
                     const ConvSpec& spec) {
    check_conv_operands(x, w, b, spec, false);
    const auto out_sp = conv_output_shape(spec, {x.dim(1), x.dim(2), x.dim(3)});
    Tensor out({spec.out_channels, out_sp[0], out_sp[1], out_sp[2]});

    const int64_t D = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto [kz, ky, kx] = spec.kernel;
    const auto [sz, sy, sx] = spec.stride;
    const auto [pz, py, px] = spec.pad;

    for (int64_t oc = 0; oc < spec.out_channels; ++oc)
        for (int64_t oz = 0; oz < out_sp[0]; ++oz)
            for (int64_t oy = 0; oy < out_sp[1]; ++oy)
                for (int64_t ox = 0; ox < out_sp[2]; ++ox) {
                    float acc = spec.bias ? b->data()[oc] : 0.0f;
                    for (int64_t ic = 0; ic < spec.in_channels; ++ic)
                        for (int64_t z = 0; z < kz; ++z) {
                            const int64_t iz = oz * sz + z - pz;
                            if (iz < 0 || iz >= D) continue;
                            for (int64_t y = 0; y < ky; ++y) {
                                const int64_t iy = oy * sy + y - py;
                                if (iy < 0 || iy >= H) continue;
                                for (int64_t xk = 0; xk < kx; ++xk) {
                                    const int64_t ix = ox * sx + xk - px;
                                    if (ix < 0 || ix >= W) continue;
                                    acc += x.at(ic, iz, iy, ix) *
                                           w.data()[(((oc * spec.in_channels + ic) * kz + z) * ky + y) * kx + xk];
                                }
                            }
                        }
                    out.at(oc, oz, oy, ox) = acc;
                }
    return out;
}

namespace {

// All fast paths share this skeleton: tasks are (oc, oz) pairs, each task
// owns its output rows exclusively, and per-voxel accumulation order is the
// fixed (ic, kz, ky, kx) sequence regardless of the partition.

struct FastArgs {
    const float* x;
    const float* w;
    const float* b;
    float* out;
    ConvSpec spec;
    ConvDims d;
};

inline void init_row(float* row, int64_t n, const float* b, int64_t oc) {
    const float v = b ? b[oc] : 0.0f;
    std::fill(row, row + n, v);
}

inline void relu_row(float* row, int64_t n) {
    for (int64_t i = 0; i < n; ++i)
        if (row[i] < 0.0f) row[i] = 0.0f;
}

// 1x1x1 kernels, zero padding: a per-voxel channel mix.
void path_pointwise(const FastArgs& a, bool fuse_relu, int64_t oc, int64_t oz) {
    const auto& s = a.spec;
    const auto& d = a.d;
    const int64_t iz = oz * s.stride[0];
    for (int64_t oy = 0; oy < d.OH; ++oy) {
        float* row = a.out + ((oc * d.OD + oz) * d.OH + oy) * d.OW;
        init_row(row, d.OW, a.b, oc);
        const int64_t iy = oy * s.stride[1];
        for (int64_t ic = 0; ic < s.in_channels; ++ic) {
            const float wv = a.w[oc * s.in_channels + ic];
            const float* in_row = a.x + ((ic * d.D + iz) * d.H + iy) * d.W;
            if (s.stride[2] == 1) {
                for (int64_t ox = 0; ox < d.OW; ++ox) row[ox] += wv * in_row[ox];
            } else {
                const int64_t sx = s.stride[2];
                for (int64_t ox = 0; ox < d.OW; ++ox) row[ox] += wv * in_row[ox * sx];
            }
        }
        if (fuse_relu) relu_row(row, d.OW);
    }
}

// (k,1,1) kernels: 1D convolution along z, rows stay contiguous in x.
void path_axis_z(const FastArgs& a, bool fuse_relu, int64_t oc, int64_t oz) {
    const auto& s = a.spec;
    const auto& d = a.d;
    const int64_t K = s.kernel[0];
    for (int64_t oy = 0; oy < d.OH; ++oy) {
        float* row = a.out + ((oc * d.OD + oz) * d.OH + oy) * d.OW;
        init_row(row, d.OW, a.b, oc);
        const int64_t iy = oy * s.stride[1];
        for (int64_t ic = 0; ic < s.in_channels; ++ic)
            for (int64_t k = 0; k < K; ++k) {
                const int64_t iz = oz * s.stride[0] + k - s.pad[0];
                if (iz < 0 || iz >= d.D) continue;
                const float wv = a.w[(oc * s.in_channels + ic) * K + k];
                const float* in_row = a.x + ((ic * d.D + iz) * d.H + iy) * d.W;
                if (s.stride[2] == 1) {
                    for (int64_t ox = 0; ox < d.OW; ++ox) row[ox] += wv * in_row[ox];
                } else {
                    const int64_t sx = s.stride[2];
                    for (int64_t ox = 0; ox < d.OW; ++ox) row[ox] += wv * in_row[ox * sx];
                }
            }
        if (fuse_relu) relu_row(row, d.OW);
    }
}

// (1,k,1) kernels: 1D convolution along y.
void path_axis_y(const FastArgs& a, bool fuse_relu, int64_t oc, int64_t oz) {
    const auto& s = a.spec;
    const auto& d = a.d;
    const int64_t K = s.kernel[1];
    const int64_t iz = oz * s.stride[0];
    for (int64_t oy = 0; oy < d.OH; ++oy) {
        float* row = a.out + ((oc * d.OD + oz) * d.OH + oy) * d.OW;
        init_row(row, d.OW, a.b, oc);
        for (int64_t ic = 0; ic < s.in_channels; ++ic)
            for (int64_t k = 0; k < K; ++k) {
                const int64_t iy = oy * s.stride[1] + k - s.pad[1];
                if (iy < 0 || iy >= d.H) continue;
                const float wv = a.w[(oc * s.in_channels + ic) * K + k];
                const float* in_row = a.x + ((ic * d.D + iz) * d.H + iy) * d.W;
                if (s.stride[2] == 1) {
                    for (int64_t ox = 0; ox < d.OW; ++ox) row[ox] += wv * in_row[ox];
                } else {
                    const int64_t sx = s.stride[2];
                    for (int64_t ox = 0; ox < d.OW; ++ox) row[ox] += wv * in_row[ox * sx];
                }
            }
        if (fuse_relu) relu_row(row, d.OW);
    }
}

// (1,1,k) kernels: 1D convolution along the contiguous axis.
void path_axis_x(const FastArgs& a, bool fuse_relu, int64_t oc, int64_t oz) {
    const auto& s = a.spec;
    const auto& d = a.d;
    const int64_t K = s.kernel[2], sx = s.stride[2], px = s.pad[2];
    const int64_t iz = oz * s.stride[0];
    for (int64_t oy = 0; oy < d.OH; ++oy) {
        float* row = a.out + ((oc * d.OD + oz) * d.OH + oy) * d.OW;
        init_row(row, d.OW, a.b, oc);
        const int64_t iy = oy * s.stride[1];
        for (int64_t ic = 0; ic < s.in_channels; ++ic) {
            const float* in_row = a.x + ((ic * d.D + iz) * d.H + iy) * d.W;
            const float* wrow = a.w + (oc * s.in_channels + ic) * K;
            for (int64_t k = 0; k < K; ++k) {
                const float wv = wrow[k];
                const int64_t off = k - px;
                int64_t lo, hi;
                tap_bounds(off, sx, d.W, d.OW, lo, hi);
                const float* src = in_row + off;
                if (sx == 1) {
                    for (int64_t ox = lo; ox < hi; ++ox) row[ox] += wv * src[ox];
                } else {
                    for (int64_t ox = lo; ox < hi; ++ox) row[ox] += wv * src[ox * sx];
                }
            }
        }
        if (fuse_relu) relu_row(row, d.OW);
    }
}

void path_general(const FastArgs& a, bool fuse_relu, int64_t oc, int64_t oz) {
    const auto& s = a.spec;
    const auto& d = a.d;
    const auto [KZ, KY, KX] = s.kernel;
    const int64_t sx = s.stride[2], px = s.pad[2];
    for (int64_t oy = 0; oy < d.OH; ++oy) {
        float* row = a.out + ((oc * d.OD + oz) * d.OH + oy) * d.OW;
        init_row(row, d.OW, a.b, oc);
        for (int64_t ic = 0; ic < s.in_channels; ++ic)
            for (int64_t z = 0; z < KZ; ++z) {
                const int64_t iz = oz * s.stride[0] + z - s.pad[0];
                if (iz < 0 || iz >= d.D) continue;
                for (int64_t y = 0; y < KY; ++y) {
                    const int64_t iy = oy * s.stride[1] + y - s.pad[1];
                    if (iy < 0 || iy >= d.H) continue;
                    const float* in_row = a.x + ((ic * d.D + iz) * d.H + iy) * d.W;
                    const float* wrow = a.w + (((oc * s.in_channels + ic) * KZ + z) * KY + y) * KX;
                    for (int64_t k = 0; k < KX; ++k) {
                        const float wv = wrow[k];
                        const int64_t off = k - px;
                        int64_t lo, hi;
                        tap_bounds(off, sx, d.W, d.OW, lo, hi);
                        const float* src = in_row + off;
                        if (sx == 1) {
                            for (int64_t ox = lo; ox < hi; ++ox) row[ox] += wv * src[ox];
                        } else {
                            for (int64_t ox = lo; ox < hi; ++ox) row[ox] += wv * src[ox * sx];
                        }
                    }
                }
            }
        if (fuse_relu) relu_row(row, d.OW);
    }
}

}  // namespace

void conv3d_fast_into(ConstView4 x, const float* w, const float* b,
                      const ConvSpec& spec, View4 out, ThreadPool* pool,
                      bool fuse_relu) {
    FastArgs a{x.p, w, b, out.p, spec, {x.d, x.h, x.w, out.d, out.h, out.w}};
    const auto [kz, ky, kx] = spec.kernel;

    void (*path)(const FastArgs&, bool, int64_t, int64_t) = path_general;
    if (kz == 1 && ky == 1 && kx == 1 && spec.pad == std::array<int64_t, 3>{0, 0, 0})
        path = path_pointwise;
    else if (ky == 1 && kx == 1 && spec.pad[1] == 0 && spec.pad[2] == 0)
        path = path_axis_z;
    else if (kz == 1 && kx == 1 && spec.pad[0] == 0 && spec.pad[2] == 0)
        path = path_axis_y;
    else if (kz == 1 && ky == 1 && spec.pad[0] == 0 && spec.pad[1] == 0)
        path = path_axis_x;

    parallel_for(pool, 0, spec.out_channels * out.d, [&](int64_t lo, int64_t hi) {
        for (int64_t t = lo; t < hi; ++t) path(a, fuse_relu, t / out.d, t % out.d);
    });
}

Tensor conv3d_fast(const Tensor& x, const Tensor& w, const Tensor* b,
                   const ConvSpec& spec, ThreadPool* pool, bool fuse_relu) {
    check_conv_operands(x, w, b, spec, false);
    const auto out_sp = conv_output_shape(spec, {x.dim(1), x.dim(2), x.dim(3)});
    Tensor out({spec.out_channels, out_sp[0], out_sp[1], out_sp[2]});
    conv3d_fast_into({x.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)}, w.data(),
                     spec.bias ? b->data() : nullptr, spec,
                     {out.data(), out.dim(0), out.dim(1), out.dim(2), out.dim(3)}, pool,
                     fuse_relu);
    return out;
}

void conv_transpose3d_into(ConstView4 x, const float* w, const float* b,
                           const ConvSpec& spec, View4 out, ThreadPool* pool) {
    const auto [KZ, KY, KX] = spec.kernel;
    const auto [sz, sy, sx] = spec.stride;
    const auto [pz, py, px] = spec.pad;
    const int64_t Cin = spec.in_channels, Cout = spec.out_channels;

    // Per output index, the (kernel tap, input index) pairs that contribute:
    // i = (o + p - k) / s where the division is exact and i is in range.
    auto axis_taps = [](int64_t out_extent, int64_t in_extent, int64_t K, int64_t s,
                        int64_t p) {
        std::vector<std::vector<std::pair<int64_t, int64_t>>> taps(out_extent);
        for (int64_t o = 0; o < out_extent; ++o)
            for (int64_t k = 0; k < K; ++k) {
                const int64_t num = o + p - k;
                if (num < 0 || num % s != 0) continue;
                const int64_t i = num / s;
                if (i < in_extent) taps[o].emplace_back(k, i);
            }
        return taps;
    };
    const auto taps_z = axis_taps(out.d, x.d, KZ, sz, pz);
    const auto taps_y = axis_taps(out.h, x.h, KY, sy, py);

    parallel_for(pool, 0, Cout * out.d, [&](int64_t lo_t, int64_t hi_t) {
        for (int64_t t = lo_t; t < hi_t; ++t) {
            const int64_t oc = t / out.d, oz = t % out.d;
            for (int64_t oy = 0; oy < out.h; ++oy) {
                float* row = out.p + ((oc * out.d + oz) * out.h + oy) * out.w;
                init_row(row, out.w, b, oc);
                for (const auto& [kz, iz] : taps_z[oz])
                    for (const auto& [ky, iy] : taps_y[oy])
                        for (int64_t ic = 0; ic < Cin; ++ic) {
                            const float* in_row = x.p + ((ic * x.d + iz) * x.h + iy) * x.w;
                            const float* wrow =
                                w + (((ic * Cout + oc) * KZ + kz) * KY + ky) * KX;
                            for (int64_t kx = 0; kx < KX; ++kx) {
                                const float wv = wrow[kx];
                                const int64_t off = kx - px;  // ox = ix*sx + off
                                int64_t ix_lo = off < 0 ? (-off + sx - 1) / sx : 0;
                                // ix*sx + off <= out.w - 1
                                const int64_t lim = out.w - off;
                                int64_t ix_hi =
                                    lim <= 0 ? 0 : std::min(x.w, (lim - 1) / sx + 1);
                                for (int64_t ix = ix_lo; ix < ix_hi; ++ix)
                                    row[ix * sx + off] += wv * in_row[ix];
                            }
                        }
            }
        }
    });
}

Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor* b,
                        const ConvSpec& spec, ThreadPool* pool) {
    check_conv_operands(x, w, b, spec, true);
    const auto out_sp = conv_transpose_output_shape(spec, {x.dim(1), x.dim(2), x.dim(3)});
    Tensor out({spec.out_channels, out_sp[0], out_sp[1], out_sp[2]});
    conv_transpose3d_into({x.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)}, w.data(),
                          spec.bias ? b->data() : nullptr, spec,
                          {out.data(), out.dim(0), out.dim(1), out.dim(2), out.dim(3)},
                          pool);
    return out;
}

void relu_into(View4 out, ConstView4 x, ThreadPool* pool) {
    const int64_t n = x.c * x.d * x.h * x.w;
    parallel_for(pool, 0, n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) out.p[i] = x.p[i] < 0.0f ? 0.0f : x.p[i];
    });
}

Tensor relu(const Tensor& x) {
    Tensor out(x.dims());
    const float* in = x.data();
    float* o = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) o[i] = in[i] < 0.0f ? 0.0f : in[i];
    return out;
}

namespace {

bool is_channel_vector(const ConstView4& y, int64_t channels) {
    return y.c == channels && y.d == 1 && y.h == 1 && y.w == 1;
}

}  // namespace

void add_into(View4 out, ConstView4 x, ConstView4 y, ThreadPool* pool) {
    const int64_t spatial = x.d * x.h * x.w;
    if (y.c == x.c && y.d == x.d && y.h == x.h && y.w == x.w) {
        const int64_t n = x.c * spatial;
        parallel_for(pool, 0, n, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) out.p[i] = x.p[i] + y.p[i];
        });
    } else if (is_channel_vector(y, x.c)) {
        parallel_for(pool, 0, x.c, [&](int64_t lo, int64_t hi) {
            for (int64_t c = lo; c < hi; ++c) {
                const float v = y.p[c];
                for (int64_t i = 0; i < spatial; ++i)
                    out.p[c * spatial + i] = x.p[c * spatial + i] + v;
            }
        });
    } else {
        throw validation_error("add: shape mismatch");
    }
}

Tensor add(const Tensor& x, const Tensor& y) {
    if (x.rank() == 4 && y.rank() == 1 && y.dim(0) == x.dim(0)) {
        Tensor out(x.dims());
        add_into({out.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)},
                 {x.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)},
                 {y.data(), y.dim(0), 1, 1, 1}, nullptr);
        return out;
    }
    if (!x.same_shape(y)) {
        if (x.rank() == 4 && y.rank() == 4 && y.dim(0) == x.dim(0) && y.dim(1) == 1 &&
            y.dim(2) == 1 && y.dim(3) == 1) {
            Tensor out(x.dims());
            add_into({out.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)},
                     {x.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)},
                     {y.data(), y.dim(0), 1, 1, 1}, nullptr);
            return out;
        }
        throw validation_error("add: shape mismatch");
    }
    Tensor out(x.dims());
    const float* a = x.data();
    const float* b = y.data();
    float* o = out.data();
    for (int64_t i = 0; i < x.numel(); ++i) o[i] = a[i] + b[i];
    return out;
}

void concat_into(View4 out, ConstView4 x, ConstView4 y) {
    const int64_t nx = x.c * x.d * x.h * x.w;
    const int64_t ny = y.c * y.d * y.h * y.w;
    std::memcpy(out.p, x.p, sizeof(float) * nx);
    std::memcpy(out.p + nx, y.p, sizeof(float) * ny);
}

Tensor concat_channels(const Tensor& x, const Tensor& y) {
    if (x.rank() != 4 || y.rank() != 4 || x.dim(1) != y.dim(1) || x.dim(2) != y.dim(2) ||
        x.dim(3) != y.dim(3))
        throw validation_error("concat: spatial dims must match");
    Tensor out({x.dim(0) + y.dim(0), x.dim(1), x.dim(2), x.dim(3)});
    concat_into({out.data(), out.dim(0), out.dim(1), out.dim(2), out.dim(3)},
                {x.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3)},
                {y.data(), y.dim(0), y.dim(1), y.dim(2), y.dim(3)});
    return out;
}

Tensor he_normal_init(const ConvSpec& spec, uint64_t seed) {
    spec.validate();
    const auto [kz, ky, kx] = spec.kernel;
    Tensor w({spec.out_channels, spec.in_channels, kz, ky, kx});
    const double fan_in = static_cast<double>(spec.in_channels) * kz * ky * kx;
    const double stddev = std::sqrt(2.0 / fan_in);
    float* p = w.data();
    for (int64_t i = 0; i < w.numel(); ++i)
        p[i] = static_cast<float>(stddev * rng::normal(seed, static_cast<uint64_t>(i)));
    return w;
}

}  // namespace cobra
