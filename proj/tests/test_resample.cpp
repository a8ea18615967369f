#include <doctest.h>

#include <cmath>

#include "cobra/resample.hpp"
#include "support/synthetic.hpp"

using namespace cobra;

namespace {

Volume from_fn(const std::array<int64_t, 3>& shape, auto fn) {
    Geometry g;
    g.shape = shape;
    Volume v(g);
    for (int64_t z = 0; z < shape[0]; ++z)
        for (int64_t y = 0; y < shape[1]; ++y)
            for (int64_t x = 0; x < shape[2]; ++x) v.at(z, y, x) = float(fn(z, y, x));
    return v;
}

}  // namespace

TEST_CASE("identity-shape cubic resampling reproduces grid values") {
    const Volume v = from_fn({7, 9, 11}, [](auto z, auto y, auto x) {
        return std::sin(0.3 * z) + 0.7 * std::cos(0.5 * y) - 0.2 * x;
    });
    const Volume r = resample_image(v, v.geom.shape, 3);
    double m = 0;
    for (size_t i = 0; i < v.data.size(); ++i)
        m = std::max(m, std::abs(double(v.data[i]) - r.data[i]));
    CHECK(m < 1e-4);  // B-spline prefilter + evaluation is an interpolant
}

TEST_CASE("constants are reproduced at any target shape") {
    Geometry g;
    g.shape = {6, 10, 14};
    const Volume v(g, 7.0f);
    for (const auto& target : {std::array<int64_t, 3>{3, 5, 7},
                               std::array<int64_t, 3>{12, 20, 28},
                               std::array<int64_t, 3>{6, 10, 14},
                               std::array<int64_t, 3>{5, 24, 3}}) {
        const Volume r = resample_image(v, target, 3);
        CHECK(r.geom.shape == target);
        for (float x : r.data) CHECK(std::abs(x - 7.0f) < 1e-4f);
    }
}

TEST_CASE("spacing rescales by the shape ratio and origin is kept") {
    Geometry g;
    g.shape = {8, 8, 8};
    g.spacing = {2.0, 1.0, 0.5};
    g.origin = {3.0, -1.0, 0.25};
    const Volume v(g, 1.0f);
    const Volume r = resample_image(v, {4, 16, 8}, 3);
    CHECK(r.geom.spacing[0] == doctest::Approx(4.0));
    CHECK(r.geom.spacing[1] == doctest::Approx(0.5));
    CHECK(r.geom.spacing[2] == doctest::Approx(0.5));
    CHECK(r.geom.origin == g.origin);
}

TEST_CASE("upsample then downsample a smooth sinusoid returns near the original") {
    const Volume v = from_fn({10, 12, 14}, [](auto z, auto y, auto x) {
        return std::sin(0.4 * z) * std::sin(0.35 * y) * std::sin(0.3 * x);
    });
    const Volume up = resample_image(v, {20, 24, 28}, 3);
    const Volume back = resample_image(up, {10, 12, 14}, 3);
    double m = 0;
    for (size_t i = 0; i < v.data.size(); ++i)
        m = std::max(m, std::abs(double(v.data[i]) - back.data[i]));
    CHECK(m < 0.05);
}

TEST_CASE("intensity-shift commutation: resample(v + c) = resample(v) + c") {
    const Volume v = from_fn({9, 13, 17}, [](auto z, auto y, auto x) {
        return 0.1 * z * z - 0.5 * y + std::sin(0.8 * x);
    });
    Volume shifted = v;
    for (float& x : shifted.data) x += 250.0f;

    // Downsampling engages the in-plane Gaussian path too.
    const Volume a = resample_image(v, {5, 6, 8}, 3);
    const Volume b = resample_image(shifted, {5, 6, 8}, 3);
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(double(a.data[i]) + 250.0 - b.data[i]));
    CHECK(m < 1e-3);  // 250 eats some float precision
}

TEST_CASE("trilinear order-1 agrees with a hand check on a ramp") {
    // f(z) = z along the through-plane axis (never anti-alias blurred);
    // downsampling by 2 samples src = 2i + 0.5, so values are 2i + 0.5.
    const Volume v = from_fn({8, 1, 1}, [](auto z, auto, auto) { return double(z); });
    const Volume r = resample_image(v, {4, 1, 1}, 1);
    for (int64_t i = 0; i < 4; ++i)
        CHECK(r.data[size_t(i)] == doctest::Approx(2.0 * i + 0.5).epsilon(1e-6));
}

TEST_CASE("degenerate axes pass through as constants with a warning") {
    Geometry g;
    g.shape = {1, 6, 6};
    Volume v(g);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i);
    bool warned = false;
    const Volume r = resample_image(v, {4, 6, 6}, 3, &warned);
    CHECK(warned);
    CHECK(r.geom.shape == std::array<int64_t, 3>{4, 6, 6});
    for (int64_t z = 0; z < 4; ++z)
        for (int64_t i = 0; i < 36; ++i)
            CHECK(r.data[size_t(z * 36 + i)] == doctest::Approx(v.data[size_t(i)]));
}

TEST_CASE("nearest label resampling") {
    SUBCASE("identity is exact") {
        const LabelVolume lv = synthetic::random_labels({5, 6, 7}, 5, 4);
        const LabelVolume r = resample_labels_nearest(lv, lv.geom.shape);
        CHECK(r.data == lv.data);
    }

    SUBCASE("constant fields stay constant") {
        Geometry g;
        g.shape = {6, 6, 6};
        LabelVolume lv(g, 5, 3);
        const LabelVolume r = resample_labels_nearest(lv, {3, 3, 3});
        for (uint8_t v : r.data) CHECK(v == 3);
    }

    SUBCASE("single labeled corner voxel maps to the corner only") {
        // (4,4,4) -> (2,2,2): output i samples src (2i + 0.5), nearest with
        // round-half-down = voxel 0 for i=0 picks... src=0.5 -> ceil(0)=0.
        Geometry g;
        g.shape = {4, 4, 4};
        LabelVolume lv(g, 2, 0);
        lv.at(0, 0, 0) = 1;
        const LabelVolume r = resample_labels_nearest(lv, {2, 2, 2});
        for (int64_t z = 0; z < 2; ++z)
            for (int64_t y = 0; y < 2; ++y)
                for (int64_t x = 0; x < 2; ++x)
                    CHECK(int(r.at(z, y, x)) == ((z | y | x) == 0 ? 1 : 0));
    }

    SUBCASE("2x upsampling a single voxel gives a 2x2x2 block") {
        Geometry g;
        g.shape = {2, 2, 2};
        LabelVolume lv(g, 2, 0);
        lv.at(1, 0, 1) = 1;
        const LabelVolume r = resample_labels_nearest(lv, {4, 4, 4});
        int count = 0;
        for (int64_t z = 0; z < 4; ++z)
            for (int64_t y = 0; y < 4; ++y)
                for (int64_t x = 0; x < 4; ++x)
                    if (r.at(z, y, x) == 1) {
                        ++count;
                        CHECK(z >= 2);
                        CHECK(y < 2);
                        CHECK(x >= 2);
                    }
        CHECK(count == 8);
    }

    SUBCASE("no labels are invented on random volumes") {
        for (uint64_t seed = 0; seed < 10; ++seed) {
            const LabelVolume lv = synthetic::random_labels({6, 7, 8}, 6, seed);
            std::array<bool, 6> present_in{};
            for (uint8_t v : lv.data) present_in[v] = true;
            const auto target = std::array<int64_t, 3>{1 + int64_t(seed % 9),
                                                       3 + int64_t(seed % 7),
                                                       2 + int64_t(seed % 11)};
            const LabelVolume r = resample_labels_nearest(lv, target);
            for (uint8_t v : r.data) CHECK(present_in[v]);
        }
    }
}
