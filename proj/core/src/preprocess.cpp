#include "cobra/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cobra {

Tensor window_normalize(const Volume& v, const WindowSpec& w) {
    v.validate();
    w.validate();
    const auto& s = v.geom.shape;
    Tensor out({s[0], s[1], s[2]});
    const double lo = w.level - w.width / 2.0;
    const double inv = 1.0 / w.width;
    float* o = out.data();
    for (size_t i = 0; i < v.data.size(); ++i) {
        const double t = (v.data[i] - lo) * inv;
        o[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
    return out;
}

Tensor make_input_channels(const Volume& v) {
    v.validate();
    if (v.geom.shape != kNetworkShape)
        throw validation_error("make_input_channels: volume must be at the network resolution");
    const Tensor c0 = window_normalize(v, kSoftTissueWindow);
    const Tensor c1 = window_normalize(v, kPancreasWindow);
    Tensor out({2, kNetworkShape[0], kNetworkShape[1], kNetworkShape[2]});
    const int64_t n = c0.numel();
    std::copy_n(c0.data(), n, out.data());
    std::copy_n(c1.data(), n, out.data() + n);
    return out;
}

namespace {

// 6-connected neighbour offsets.
constexpr std::array<std::array<int64_t, 3>, 6> kNeighbours{{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1},
}};

// Dilation/erosion with the 3x3x3 6-connected cross element. Out-of-bounds
// voxels count as background, so erosion shrinks the mask at volume borders.
std::vector<uint8_t> morph(const std::vector<uint8_t>& in,
                           const std::array<int64_t, 3>& s, bool dilate) {
    std::vector<uint8_t> out(in.size());
    const int64_t D = s[0], H = s[1], W = s[2];
    int64_t i = 0;
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x, ++i) {
                bool acc = in[i] != 0;
                for (const auto& n : kNeighbours) {
                    if (dilate == acc) break;  // saturated for this op
                    const int64_t nz = z + n[0], ny = y + n[1], nx = x + n[2];
                    const bool v = nz >= 0 && nz < D && ny >= 0 && ny < H &&
                                   nx >= 0 && nx < W &&
                                   in[(nz * H + ny) * W + nx] != 0;
                    acc = dilate ? (acc || v) : (acc && v);
                }
                out[i] = acc ? 1 : 0;
            }
    return out;
}

// Flood fill over zero voxels reachable from the volume border; everything
// not reached is an enclosed hole.
void fill_holes(std::vector<uint8_t>& mask, const std::array<int64_t, 3>& s) {
    const int64_t D = s[0], H = s[1], W = s[2];
    std::vector<uint8_t> outside(mask.size(), 0);
    std::vector<int64_t> stack;
    auto push = [&](int64_t z, int64_t y, int64_t x) {
        const int64_t i = (z * H + y) * W + x;
        if (mask[i] == 0 && outside[i] == 0) {
            outside[i] = 1;
            stack.push_back(i);
        }
    };
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                if (z == 0 || z == D - 1 || y == 0 || y == H - 1 || x == 0 || x == W - 1)
                    push(z, y, x);
    while (!stack.empty()) {
        const int64_t i = stack.back();
        stack.pop_back();
        const int64_t z = i / (H * W), y = (i / W) % H, x = i % W;
        for (const auto& n : kNeighbours) {
            const int64_t nz = z + n[0], ny = y + n[1], nx = x + n[2];
            if (nz >= 0 && nz < D && ny >= 0 && ny < H && nx >= 0 && nx < W)
                push(nz, ny, nx);
        }
    }
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == 0 && outside[i] == 0) mask[i] = 1;
}

}  // namespace

LabelVolume compute_body_mask(const Volume& v) {
    v.validate();
    const auto& s = v.geom.shape;
    std::vector<uint8_t> mask(v.data.size());
    for (size_t i = 0; i < v.data.size(); ++i) mask[i] = v.data[i] > -200.0f ? 1 : 0;
    mask = morph(mask, s, /*dilate=*/true);   // closing = dilate,
    mask = morph(mask, s, /*dilate=*/false);  // then erode
    fill_holes(mask, s);

    LabelVolume out;
    out.geom = v.geom;
    out.class_count = 2;
    out.data = std::move(mask);
    return out;
}

LabelVolume split_background(const LabelVolume& lv, const LabelVolume& body_mask) {
    lv.validate();
    body_mask.validate();
    if (lv.geom.shape != body_mask.geom.shape)
        throw validation_error("split_background: label and mask shapes differ");
    if (lv.class_count > kOutputClassCount)
        throw validation_error("split_background: expected FLARE labels 0..4");

    LabelVolume out;
    out.geom = lv.geom;
    out.class_count = kInternalClassCount;
    out.data.resize(lv.data.size());
    for (size_t i = 0; i < lv.data.size(); ++i) {
        const uint8_t v = lv.data[i];
        out.data[i] = v > 0 ? static_cast<uint8_t>(v + 1)
                            : (body_mask.data[i] ? 1 : 0);
    }
    return out;
}

}  // namespace cobra
