#include "cobra/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cobra {

namespace {

// Applies fn(start_offset, stride) for every 1D line along `axis` of a
// (s0, s1, s2) row-major volume.
template <typename F>
void for_each_line(const std::array<int64_t, 3>& s, int axis, F&& fn) {
    const int64_t plane = s[1] * s[2];
    if (axis == 0) {
        for (int64_t j = 0; j < s[1]; ++j)
            for (int64_t k = 0; k < s[2]; ++k) fn(j * s[2] + k, plane);
    } else if (axis == 1) {
        for (int64_t i = 0; i < s[0]; ++i)
            for (int64_t k = 0; k < s[2]; ++k) fn(i * plane + k, s[2]);
    } else {
        for (int64_t i = 0; i < s[0]; ++i)
            for (int64_t j = 0; j < s[1]; ++j) fn((i * s[1] + j) * s[2], 1);
    }
}

inline int64_t clamp_idx(int64_t i, int64_t n) {
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

void gaussian_blur_axis(std::vector<float>& data, const std::array<int64_t, 3>& s,
                        int axis, double sigma) {
    const int64_t r = std::max<int64_t>(1, static_cast<int64_t>(4.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int64_t t = -r; t <= r; ++t) {
        k[t + r] = std::exp(-0.5 * (t / sigma) * (t / sigma));
        sum += k[t + r];
    }
    for (double& v : k) v /= sum;

    const int64_t n = s[axis];
    std::vector<double> line(n);
    std::vector<float> out(n);
    for_each_line(s, axis, [&](int64_t start, int64_t stride) {
        for (int64_t i = 0; i < n; ++i) line[i] = data[start + i * stride];
        for (int64_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int64_t t = -r; t <= r; ++t) acc += k[t + r] * line[clamp_idx(i + t, n)];
            out[i] = static_cast<float>(acc);
        }
        for (int64_t i = 0; i < n; ++i) data[start + i * stride] = out[i];
    });
}

// Cubic B-spline coefficients under clamp-to-edge: out-of-range coefficient
// indices clamp to the boundary at evaluation time, so the matching
// prefilter solves the tridiagonal system with interior rows (1,4,1)/6 and
// edge rows (5,1)/6 — exact grid-point reproduction by construction.
struct ThomasPlan {
    std::vector<double> cp;  // forward-eliminated upper-diagonal factors
    explicit ThomasPlan(int64_t n) : cp(n) {
        cp[0] = 1.0 / 5.0;
        for (int64_t i = 1; i < n; ++i) {
            const double diag = (i == n - 1) ? 5.0 : 4.0;
            cp[i] = 1.0 / (diag - cp[i - 1]);
        }
    }
};

void prefilter_axis(std::vector<float>& data, const std::array<int64_t, 3>& s, int axis) {
    const int64_t n = s[axis];
    if (n < 2) return;  // a single sample is its own coefficient
    const ThomasPlan plan(n);
    std::vector<double> dp(n);
    for_each_line(s, axis, [&](int64_t start, int64_t stride) {
        dp[0] = 6.0 * data[start] * plan.cp[0];
        for (int64_t i = 1; i < n; ++i)
            dp[i] = (6.0 * data[start + i * stride] - dp[i - 1]) * plan.cp[i];
        double prev = dp[n - 1];
        data[start + (n - 1) * stride] = static_cast<float>(prev);
        for (int64_t i = n - 2; i >= 0; --i) {
            prev = dp[i] - plan.cp[i] * prev;
            data[start + i * stride] = static_cast<float>(prev);
        }
    });
}

struct AxisTaps {
    int taps;                      // 1 (constant), 2 (linear) or 4 (cubic)
    std::vector<int64_t> base;     // first source index per output, pre-clamped later
    std::vector<double> w;         // taps weights per output, row-major
};

AxisTaps make_taps(int64_t n_in, int64_t n_out, int order) {
    AxisTaps t;
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    if (n_in == 1) {
        t.taps = 1;
        t.base.assign(n_out, 0);
        t.w.assign(n_out, 1.0);
        return t;
    }
    t.base.resize(n_out);
    if (order == 1) {
        t.taps = 2;
        t.w.resize(n_out * 2);
        for (int64_t i = 0; i < n_out; ++i) {
            const double src = (i + 0.5) * scale - 0.5;
            const double fb = std::floor(src);
            const double u = src - fb;
            t.base[i] = static_cast<int64_t>(fb);
            t.w[i * 2 + 0] = 1.0 - u;
            t.w[i * 2 + 1] = u;
        }
    } else {
        t.taps = 4;
        t.w.resize(n_out * 4);
        for (int64_t i = 0; i < n_out; ++i) {
            const double src = (i + 0.5) * scale - 0.5;
            const double fb = std::floor(src);
            const double u = src - fb;
            t.base[i] = static_cast<int64_t>(fb) - 1;
            t.w[i * 4 + 0] = (1 - u) * (1 - u) * (1 - u) / 6.0;
            t.w[i * 4 + 1] = (3 * u * u * u - 6 * u * u + 4) / 6.0;
            t.w[i * 4 + 2] = (-3 * u * u * u + 3 * u * u + 3 * u + 1) / 6.0;
            t.w[i * 4 + 3] = u * u * u / 6.0;
        }
    }
    return t;
}

// Resamples one axis: shape s -> s with s[axis] = n_out.
std::vector<float> contract_axis(const std::vector<float>& data,
                                 std::array<int64_t, 3>& s, int axis,
                                 const AxisTaps& t, int64_t n_out) {
    const int64_t n_in = s[axis];
    std::array<int64_t, 3> out_s = s;
    out_s[axis] = n_out;
    std::vector<float> out(out_s[0] * out_s[1] * out_s[2]);

    std::vector<double> line(n_in);
    // Walk input/output lines in lockstep; for_each_line enumerates lines in
    // the same (other-axes) order for both shapes.
    std::vector<std::pair<int64_t, int64_t>> in_lines, out_lines;
    for_each_line(s, axis, [&](int64_t st, int64_t str) { in_lines.emplace_back(st, str); });
    for_each_line(out_s, axis, [&](int64_t st, int64_t str) { out_lines.emplace_back(st, str); });

    for (size_t li = 0; li < in_lines.size(); ++li) {
        const auto [ist, istr] = in_lines[li];
        const auto [ost, ostr] = out_lines[li];
        for (int64_t i = 0; i < n_in; ++i) line[i] = data[ist + i * istr];
        for (int64_t o = 0; o < n_out; ++o) {
            double acc = 0.0;
            for (int k = 0; k < t.taps; ++k)
                acc += t.w[o * t.taps + k] * line[clamp_idx(t.base[o] + k, n_in)];
            out[ost + o * ostr] = static_cast<float>(acc);
        }
    }
    s = out_s;
    return out;
}

}  // namespace

Volume resample_image(const Volume& v, const std::array<int64_t, 3>& target_shape,
                      int order, bool* degenerate_axis_warning) {
    v.validate();
    if (order != 1 && order != 3)
        throw validation_error("resample_image: order must be 1 or 3");
    for (int64_t d : target_shape)
        if (d < 1) throw validation_error("resample_image: target shape components must be >= 1");

    std::array<int64_t, 3> s = v.geom.shape;
    std::vector<float> work = v.data;

    if (degenerate_axis_warning) *degenerate_axis_warning = false;
    if (order == 3 && degenerate_axis_warning)
        for (int a = 0; a < 3; ++a)
            if (s[a] == 1 && target_shape[a] != s[a]) *degenerate_axis_warning = true;

    // Anti-alias in-plane downsampling only; the through-plane axis (z) is
    // left unblurred.
    for (int a : {1, 2}) {
        const double f = static_cast<double>(s[a]) / static_cast<double>(target_shape[a]);
        if (f > 1.0 && s[a] > 1) gaussian_blur_axis(work, s, a, f / 2.0);
    }

    if (order == 3)
        for (int a = 0; a < 3; ++a) prefilter_axis(work, s, a);

    for (int a = 0; a < 3; ++a) {
        const AxisTaps t = make_taps(s[a], target_shape[a], order);
        work = contract_axis(work, s, a, t, target_shape[a]);
    }

    Volume out;
    out.geom.shape = target_shape;
    for (int a = 0; a < 3; ++a)
        out.geom.spacing[a] = v.geom.spacing[a] * static_cast<double>(v.geom.shape[a]) /
                              static_cast<double>(target_shape[a]);
    out.geom.origin = v.geom.origin;
    out.data = std::move(work);
    return out;
}

LabelVolume resample_labels_nearest(const LabelVolume& lv,
                                    const std::array<int64_t, 3>& target_shape) {
    lv.validate();
    for (int64_t d : target_shape)
        if (d < 1) throw validation_error("resample_labels_nearest: target shape components must be >= 1");

    // Nearest source index per output index, one map per axis. ceil(src-0.5)
    // rounds halves down, keeping single-voxel features on the lower index.
    std::array<std::vector<int64_t>, 3> idx;
    for (int a = 0; a < 3; ++a) {
        const int64_t n_in = lv.geom.shape[a], n_out = target_shape[a];
        const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
        idx[a].resize(n_out);
        for (int64_t i = 0; i < n_out; ++i) {
            const double src = (i + 0.5) * scale - 0.5;
            idx[a][i] = clamp_idx(static_cast<int64_t>(std::ceil(src - 0.5)), n_in);
        }
    }

    LabelVolume out;
    out.geom.shape = target_shape;
    for (int a = 0; a < 3; ++a)
        out.geom.spacing[a] = lv.geom.spacing[a] * static_cast<double>(lv.geom.shape[a]) /
                              static_cast<double>(target_shape[a]);
    out.geom.origin = lv.geom.origin;
    out.class_count = lv.class_count;
    out.data.resize(target_shape[0] * target_shape[1] * target_shape[2]);

    const int64_t H = lv.geom.shape[1], W = lv.geom.shape[2];
    int64_t o = 0;
    for (int64_t z = 0; z < target_shape[0]; ++z)
        for (int64_t y = 0; y < target_shape[1]; ++y)
            for (int64_t x = 0; x < target_shape[2]; ++x, ++o)
                out.data[o] = lv.data[(idx[0][z] * H + idx[1][y]) * W + idx[2][x]];
    return out;
}

}  // namespace cobra
