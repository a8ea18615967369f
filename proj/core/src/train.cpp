#include "cobra/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace cobra {

namespace {

constexpr float kAirFill = -1024.0f;

struct ChannelShape {
    int64_t k, d, h, w, vox;
};

ChannelShape channel_shape(const Tensor& t, const char* what) {
    const auto& dims = t.dims();
    if (dims.size() != 4) throw validation_error(std::string(what) + ": expected (K,D,H,W)");
    return {dims[0], dims[1], dims[2], dims[3], dims[1] * dims[2] * dims[3]};
}

void check_pair(const Tensor& probs, const Tensor& onehot) {
    if (probs.dims() != onehot.dims())
        throw validation_error("soft dice: probs and onehot shapes differ");
    const auto s = channel_shape(onehot, "soft dice");
    const float* g = onehot.data();
    for (int64_t i = 0; i < s.vox; ++i) {
        float sum = 0;
        for (int64_t c = 0; c < s.k; ++c) {
            const float v = g[c * s.vox + i];
            if (v != 0.0f && v != 1.0f)
                throw validation_error("soft dice: onehot contains a value that is not 0 or 1");
            sum += v;
        }
        if (sum != 1.0f)
            throw validation_error("soft dice: onehot channel sums must be exactly 1");
    }
}

// Per-class Σ2pg + ε and Σp² + Σg² + ε.
struct DiceTerms {
    std::vector<double> num, den;
};

DiceTerms dice_terms(const Tensor& probs, const Tensor& onehot, double eps) {
    const auto s = channel_shape(probs, "soft dice");
    DiceTerms t{std::vector<double>(s.k), std::vector<double>(s.k)};
    const float* p = probs.data();
    const float* g = onehot.data();
    for (int64_t c = 0; c < s.k; ++c) {
        double pg = 0, pp = 0, gg = 0;
        const float* pc = p + c * s.vox;
        const float* gc = g + c * s.vox;
        for (int64_t i = 0; i < s.vox; ++i) {
            pg += double(pc[i]) * gc[i];
            pp += double(pc[i]) * pc[i];
            gg += double(gc[i]) * gc[i];
        }
        t.num[c] = 2 * pg + eps;
        t.den[c] = pp + gg + eps;
    }
    return t;
}

}  // namespace

void LossSpec::validate(int64_t k) const {
    if (static_cast<int64_t>(weights.size()) != k)
        throw validation_error("loss spec: weight count must equal class count");
    if (!(epsilon > 0)) throw validation_error("loss spec: epsilon must be > 0");
    double total = 0;
    for (double w : weights) {
        if (w < 0) throw validation_error("loss spec: weights must be >= 0");
        total += w;
    }
    if (total == 0) throw validation_error("loss spec: weights must not all be zero");
}

Tensor softmax_channels(const Tensor& logits) {
    const auto s = channel_shape(logits, "softmax");
    if (s.k < 2) throw validation_error("softmax: need at least 2 channels");
    Tensor out(logits.dims());
    const float* in = logits.data();
    float* o = out.data();
    for (int64_t i = 0; i < s.vox; ++i) {
        float mx = in[i];
        for (int64_t c = 1; c < s.k; ++c) mx = std::max(mx, in[c * s.vox + i]);
        double total = 0;
        for (int64_t c = 0; c < s.k; ++c) {
            const double e = std::exp(double(in[c * s.vox + i]) - mx);
            o[c * s.vox + i] = static_cast<float>(e);
            total += e;
        }
        for (int64_t c = 0; c < s.k; ++c)
            o[c * s.vox + i] = static_cast<float>(o[c * s.vox + i] / total);
    }
    return out;
}

Tensor one_hot(const LabelVolume& lv) {
    lv.validate();
    const int64_t vox = lv.geom.voxel_count();
    Tensor out({lv.class_count, lv.geom.shape[0], lv.geom.shape[1], lv.geom.shape[2]});
    float* o = out.data();
    for (int64_t i = 0; i < vox; ++i) o[lv.data[i] * vox + i] = 1.0f;
    return out;
}

std::vector<double> inverse_frequency_weights(const LabelVolume& lv) {
    lv.validate();
    std::vector<int64_t> counts(lv.class_count, 0);
    for (uint8_t v : lv.data) ++counts[v];
    std::vector<double> w(lv.class_count);
    double largest = 0;
    for (int c = 0; c < lv.class_count; ++c)
        if (counts[c] > 0) largest = std::max(largest, 1.0 / counts[c]);
    if (largest == 0) largest = 1.0;  // unreachable: some class owns every voxel
    double total = 0;
    for (int c = 0; c < lv.class_count; ++c) {
        w[c] = counts[c] > 0 ? 1.0 / counts[c] : largest;
        total += w[c];
    }
    for (double& x : w) x *= lv.class_count / total;
    return w;
}

double weighted_soft_dice_loss(const Tensor& probs, const Tensor& onehot,
                               const LossSpec& spec) {
    check_pair(probs, onehot);
    const auto s = channel_shape(probs, "soft dice");
    spec.validate(s.k);
    const auto t = dice_terms(probs, onehot, spec.epsilon);
    double wsum = 0, acc = 0;
    for (int64_t c = 0; c < s.k; ++c) {
        wsum += spec.weights[c];
        acc += spec.weights[c] * (t.num[c] / t.den[c]);
    }
    return 1.0 - acc / wsum;
}

Tensor soft_dice_grad(const Tensor& probs, const Tensor& onehot, const LossSpec& spec) {
    check_pair(probs, onehot);
    const auto s = channel_shape(probs, "soft dice");
    spec.validate(s.k);
    const auto t = dice_terms(probs, onehot, spec.epsilon);
    double wsum = 0;
    for (double w : spec.weights) wsum += w;

    Tensor grad(probs.dims());
    const float* p = probs.data();
    const float* g = onehot.data();
    float* out = grad.data();
    for (int64_t c = 0; c < s.k; ++c) {
        const double scale = -spec.weights[c] / wsum;
        const double num = t.num[c], den = t.den[c];
        const double inv_den2 = 1.0 / (den * den);
        const float* pc = p + c * s.vox;
        const float* gc = g + c * s.vox;
        float* oc = out + c * s.vox;
        for (int64_t i = 0; i < s.vox; ++i)
            oc[i] = static_cast<float>(scale * (2.0 * gc[i] * den - num * 2.0 * pc[i]) *
                                       inv_den2);
    }
    return grad;
}

namespace {

void check_shift(const Geometry& g, int64_t dz, int64_t dy, int64_t dx) {
    if (std::abs(dz) > g.shape[0] || std::abs(dy) > g.shape[1] || std::abs(dx) > g.shape[2])
        throw validation_error("shift: offset exceeds volume extent");
}

template <typename T>
void shift_into(const T* in, T* out, const std::array<int64_t, 3>& shape, int64_t dz,
                int64_t dy, int64_t dx, T fill) {
    const int64_t D = shape[0], H = shape[1], W = shape[2];
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const int64_t sz = z - dz, sy = y - dy, sx = x - dx;
                const bool inside =
                    sz >= 0 && sz < D && sy >= 0 && sy < H && sx >= 0 && sx < W;
                out[(z * H + y) * W + x] =
                    inside ? in[(sz * H + sy) * W + sx] : fill;
            }
}

// Rotation/scale maps carry a few ulp of trig roundoff, enough to push a
// boundary coordinate just outside the grid (an exact 90-degree rotation
// would otherwise drop corner voxels to fill). Snap those back.
double snap_to_grid(double p, int64_t n) {
    constexpr double eps = 1e-9;
    if (p < 0 && p > -eps) return 0.0;
    if (p > n - 1 && p < n - 1 + eps) return double(n - 1);
    return p;
}

// Back-projected source coordinates shared by the rotate/scale resamplers:
// fn(z, y, x) -> (src_z, src_y, src_x) in voxel units.
template <typename Src>
Volume warp_image(const Volume& v, Src src) {
    const int64_t D = v.geom.shape[0], H = v.geom.shape[1], W = v.geom.shape[2];
    Volume out(v.geom);
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const auto [qz, qy, qx] = src(z, y, x);
                const double pz = snap_to_grid(qz, D), py = snap_to_grid(qy, H),
                             px = snap_to_grid(qx, W);
                float value = kAirFill;
                if (pz >= 0 && pz <= D - 1 && py >= 0 && py <= H - 1 && px >= 0 &&
                    px <= W - 1) {
                    const int64_t z0 = std::min<int64_t>(int64_t(std::floor(pz)), D - 2 < 0 ? 0 : D - 2);
                    const int64_t y0 = std::min<int64_t>(int64_t(std::floor(py)), H - 2 < 0 ? 0 : H - 2);
                    const int64_t x0 = std::min<int64_t>(int64_t(std::floor(px)), W - 2 < 0 ? 0 : W - 2);
                    const double fz = pz - z0, fy = py - y0, fx = px - x0;
                    double acc = 0;
                    for (int cz = 0; cz < 2; ++cz)
                        for (int cy = 0; cy < 2; ++cy)
                            for (int cx = 0; cx < 2; ++cx) {
                                const int64_t iz = std::min(z0 + cz, D - 1);
                                const int64_t iy = std::min(y0 + cy, H - 1);
                                const int64_t ix = std::min(x0 + cx, W - 1);
                                const double wz = cz ? fz : 1 - fz;
                                const double wy = cy ? fy : 1 - fy;
                                const double wx = cx ? fx : 1 - fx;
                                acc += wz * wy * wx * v.at(iz, iy, ix);
                            }
                    value = static_cast<float>(acc);
                }
                out.at(z, y, x) = value;
            }
    return out;
}

template <typename Src>
LabelVolume warp_labels(const LabelVolume& lv, Src src) {
    const int64_t D = lv.geom.shape[0], H = lv.geom.shape[1], W = lv.geom.shape[2];
    LabelVolume out(lv.geom, lv.class_count);
    const auto nearest = [](double v) { return static_cast<int64_t>(std::ceil(v - 0.5)); };
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const auto [qz, qy, qx] = src(z, y, x);
                const int64_t iz = nearest(snap_to_grid(qz, D)),
                              iy = nearest(snap_to_grid(qy, H)),
                              ix = nearest(snap_to_grid(qx, W));
                uint8_t value = 0;
                if (iz >= 0 && iz < D && iy >= 0 && iy < H && ix >= 0 && ix < W)
                    value = lv.at(iz, iy, ix);
                out.at(z, y, x) = value;
            }
    return out;
}

struct RotateMap {
    double cy, cx, c, s;
    std::array<double, 3> operator()(int64_t z, int64_t y, int64_t x) const {
        const double dy = y - cy, dx = x - cx;
        return {double(z), cy + c * dy + s * dx, cx - s * dy + c * dx};
    }
};

struct ScaleMap {
    double cz, cy, cx, inv;
    std::array<double, 3> operator()(int64_t z, int64_t y, int64_t x) const {
        return {cz + (z - cz) * inv, cy + (y - cy) * inv, cx + (x - cx) * inv};
    }
};

RotateMap make_rotate(const Geometry& g, double theta_deg) {
    if (!(theta_deg >= -180.0 && theta_deg <= 180.0))
        throw validation_error("rotate: angle must lie in [-180, 180] degrees");
    const double rad = theta_deg * std::numbers::pi / 180.0;
    return {(g.shape[1] - 1) / 2.0, (g.shape[2] - 1) / 2.0, std::cos(rad), std::sin(rad)};
}

ScaleMap make_scale(const Geometry& g, double s) {
    if (!(s > 0) || s > 4.0) throw validation_error("scale: factor must lie in (0, 4]");
    return {(g.shape[0] - 1) / 2.0, (g.shape[1] - 1) / 2.0, (g.shape[2] - 1) / 2.0, 1.0 / s};
}

}  // namespace

Volume augment_shift(const Volume& v, int64_t dz, int64_t dy, int64_t dx) {
    v.validate();
    check_shift(v.geom, dz, dy, dx);
    Volume out(v.geom);
    shift_into(v.data.data(), out.data.data(), v.geom.shape, dz, dy, dx, kAirFill);
    return out;
}

LabelVolume augment_shift(const LabelVolume& lv, int64_t dz, int64_t dy, int64_t dx) {
    lv.validate();
    check_shift(lv.geom, dz, dy, dx);
    LabelVolume out(lv.geom, lv.class_count);
    shift_into(lv.data.data(), out.data.data(), lv.geom.shape, dz, dy, dx, uint8_t{0});
    return out;
}

Volume augment_rotate_inplane(const Volume& v, double theta_deg) {
    v.validate();
    return warp_image(v, make_rotate(v.geom, theta_deg));
}

LabelVolume augment_rotate_inplane(const LabelVolume& lv, double theta_deg) {
    lv.validate();
    return warp_labels(lv, make_rotate(lv.geom, theta_deg));
}

Volume augment_scale(const Volume& v, double s) {
    v.validate();
    return warp_image(v, make_scale(v.geom, s));
}

LabelVolume augment_scale(const LabelVolume& lv, double s) {
    lv.validate();
    return warp_labels(lv, make_scale(lv.geom, s));
}

}  // namespace cobra
