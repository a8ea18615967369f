#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cobra/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cobra;

namespace {

LabelVolume binary_volume(const std::array<int64_t, 3>& shape,
                          const std::array<double, 3>& spacing = {1, 1, 1}) {
    Geometry g;
    g.shape = shape;
    g.spacing = spacing;
    return LabelVolume(g, 2, 0);
}

void fill_box(LabelVolume& lv, std::array<int64_t, 3> lo, std::array<int64_t, 3> hi,
              uint8_t v = 1) {
    for (int64_t z = lo[0]; z < hi[0]; ++z)
        for (int64_t y = lo[1]; y < hi[1]; ++y)
            for (int64_t x = lo[2]; x < hi[2]; ++x) lv.at(z, y, x) = v;
}

}  // namespace

TEST_CASE("dsc: hand-computed overlaps") {
    LabelVolume a = binary_volume({4, 4, 4});
    LabelVolume b = binary_volume({4, 4, 4});

    // 2x2x2 cubes overlapping in a 2x2x1 slab: |P|=8, |G|=8, |P∩G|=4.
    fill_box(a, {0, 0, 0}, {2, 2, 2});
    fill_box(b, {0, 0, 1}, {2, 2, 3});
    CHECK(dsc(a, b, 1) == doctest::Approx(0.5));

    SUBCASE("identical masks") {
        CHECK(dsc(a, a, 1) == doctest::Approx(1.0));
    }
    SUBCASE("disjoint masks") {
        LabelVolume c = binary_volume({4, 4, 4});
        fill_box(c, {2, 2, 2}, {4, 4, 4});
        CHECK(dsc(a, c, 1) == doctest::Approx(0.0));
    }
    SUBCASE("matches the scan oracle") {
        CHECK(dsc(a, b, 1) == doctest::Approx(oracle::dsc_bruteforce(a, b, 1)));
    }
}

TEST_CASE("dsc: empty-mask conventions") {
    LabelVolume a = binary_volume({3, 3, 3});
    LabelVolume b = binary_volume({3, 3, 3});
    CHECK(dsc(a, b, 1) == doctest::Approx(1.0));  // both empty

    a.at(1, 1, 1) = 1;
    CHECK(dsc(a, b, 1) == doctest::Approx(0.0));  // one empty
    CHECK(dsc(b, a, 1) == doctest::Approx(0.0));
}

TEST_CASE("dsc: per-class selection on multi-class maps") {
    Geometry g;
    g.shape = {2, 2, 2};
    LabelVolume a(g, 4, 0);
    LabelVolume b(g, 4, 0);
    a.at(0, 0, 0) = 2;
    a.at(0, 0, 1) = 3;
    b.at(0, 0, 0) = 2;
    b.at(0, 0, 1) = 2;

    CHECK(dsc(a, b, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(dsc(a, b, 3) == doctest::Approx(0.0));
    CHECK(dsc(a, b, 1) == doctest::Approx(1.0));  // class absent from both
}

TEST_CASE("dsc/nsd: geometry checks compare shape and spacing, not origin") {
    LabelVolume a = binary_volume({3, 3, 3});
    LabelVolume b = binary_volume({3, 3, 3});
    a.at(1, 1, 1) = 1;
    b.at(1, 1, 1) = 1;

    SUBCASE("different origins are fine") {
        b.geom.origin = {50, -3, 12};
        CHECK(dsc(a, b, 1) == doctest::Approx(1.0));
        CHECK(nsd(a, b, 1, 1.0) == doctest::Approx(1.0));
    }
    SUBCASE("different shapes throw") {
        LabelVolume c = binary_volume({3, 3, 4});
        CHECK_THROWS_AS(dsc(a, c, 1), validation_error);
        CHECK_THROWS_AS(nsd(a, c, 1, 1.0), validation_error);
    }
    SUBCASE("different spacings throw") {
        b.geom.spacing = {1, 1, 1.5};
        CHECK_THROWS_AS(dsc(a, b, 1), validation_error);
        CHECK_THROWS_AS(nsd(a, b, 1, 1.0), validation_error);
    }
}

TEST_CASE("class_surface: 6-connected boundary with borders counting as outside") {
    LabelVolume lv = binary_volume({5, 5, 5});
    fill_box(lv, {1, 1, 1}, {4, 4, 4});  // 3x3x3 cube, interior voxel at (2,2,2)

    const auto surf = class_surface(lv, 1);
    int64_t count = 0;
    for (uint8_t s : surf) count += s;
    CHECK(count == 26);  // all cube voxels except the single interior one

    const int64_t center = (2 * 5 + 2) * 5 + 2;
    CHECK(surf[center] == 0);

    // A mask filling the whole volume: the border counts as outside, so every
    // voxel touching it is surface and only the dead center is interior.
    LabelVolume full = binary_volume({3, 3, 3});
    fill_box(full, {0, 0, 0}, {3, 3, 3});
    const auto fs = class_surface(full, 1);
    int64_t full_count = 0;
    for (uint8_t s : fs) full_count += s;
    CHECK(full_count == 26);
    CHECK(fs[(1 * 3 + 1) * 3 + 1] == 0);
}

TEST_CASE("nsd: identical masks score 1 at any tolerance") {
    const LabelVolume m = synthetic::random_mask({8, 8, 8}, 3);
    CHECK(nsd(m, m, 1, 0.01) == doctest::Approx(1.0));
    CHECK(nsd(m, m, 1, 2.5) == doctest::Approx(1.0));
}

TEST_CASE("nsd: empty-surface conventions") {
    LabelVolume a = binary_volume({4, 4, 4});
    LabelVolume b = binary_volume({4, 4, 4});
    CHECK(nsd(a, b, 1, 1.0) == doctest::Approx(1.0));  // both empty

    a.at(2, 2, 2) = 1;
    CHECK(nsd(a, b, 1, 1.0) == doctest::Approx(0.0));  // one empty
    CHECK(nsd(b, a, 1, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("nsd: one-voxel shift at 1mm spacing is within tau=1") {
    LabelVolume a = binary_volume({6, 8, 8});
    LabelVolume b = binary_volume({6, 8, 8});
    fill_box(a, {1, 2, 2}, {4, 6, 6});
    fill_box(b, {1, 2, 3}, {4, 6, 7});  // shifted one voxel along x

    CHECK(nsd(a, b, 1, 1.0) == doctest::Approx(1.0));
    // Exclusive would fail here; d = 1.0 exactly for the shifted faces.
    CHECK(nsd(a, b, 1, 0.5) < 1.0);
}

TEST_CASE("nsd: far-apart masks score 0") {
    LabelVolume a = binary_volume({4, 4, 24});
    LabelVolume b = binary_volume({4, 4, 24});
    fill_box(a, {1, 1, 1}, {3, 3, 3});
    fill_box(b, {1, 1, 12}, {3, 3, 14});  // nearest surface centers 10mm apart

    CHECK(nsd(a, b, 1, 1.0) == doctest::Approx(0.0));
    CHECK(nsd(a, b, 1, 9.5) == doctest::Approx(0.0));
    CHECK(nsd(a, b, 1, 10.0) > 0.0);
}

TEST_CASE("nsd: symmetric and monotone in the tolerance") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        const LabelVolume a = synthetic::random_mask({9, 9, 9}, seed);
        const LabelVolume b = synthetic::random_mask({9, 9, 9}, seed + 50);

        double prev = -1.0;
        for (double tau : {0.25, 0.5, 1.0, 1.75, 3.0, 8.0}) {
            const double ab = nsd(a, b, 1, tau);
            const double ba = nsd(b, a, 1, tau);
            CHECK(ab == ba);  // symmetric by construction, bit-exact
            CHECK(ab >= prev);
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
            prev = ab;
        }
    }
}

TEST_CASE("nsd: matches the all-pairs oracle across anisotropic spacings") {
    const std::array<double, 3> spacings[] = {
        {1.0, 1.0, 1.0},
        {2.0, 0.5, 0.5},
        {1.25, 1.0, 2.0},
    };
    for (const auto& sp : spacings) {
        for (uint64_t seed = 0; seed < 8; ++seed) {
            const LabelVolume a = synthetic::random_mask({10, 11, 12}, seed * 3 + 1, sp);
            const LabelVolume b = synthetic::random_mask({10, 11, 12}, seed * 7 + 2, sp);
            for (double tau : {0.6, 1.0, 2.0, 4.5}) {
                const double fast = nsd(a, b, 1, tau);
                const double slow = oracle::nsd_bruteforce(a, b, 1, tau);
                INFO("spacing ", sp[0], "/", sp[1], "/", sp[2], " seed ", seed, " tau ", tau);
                CHECK(std::abs(fast - slow) < 1e-9);
            }
        }
    }
}

TEST_CASE("squared_edt: matches brute-force nearest-seed distances") {
    const std::array<int64_t, 3> shape{7, 6, 8};
    const std::array<double, 3> spacing{1.25, 0.5, 2.0};
    const int64_t n = shape[0] * shape[1] * shape[2];

    for (uint64_t seed = 0; seed < 6; ++seed) {
        const LabelVolume seeds = synthetic::random_mask(shape, seed + 11);
        std::vector<double> field(n, kEdtFar);
        std::vector<std::array<int64_t, 3>> pts;
        for (int64_t z = 0; z < shape[0]; ++z)
            for (int64_t y = 0; y < shape[1]; ++y)
                for (int64_t x = 0; x < shape[2]; ++x)
                    if (seeds.at(z, y, x)) {
                        field[(z * shape[1] + y) * shape[2] + x] = 0.0;
                        pts.push_back({z, y, x});
                    }
        if (pts.empty()) continue;

        squared_edt(shape, spacing, field);

        for (int64_t z = 0; z < shape[0]; ++z)
            for (int64_t y = 0; y < shape[1]; ++y)
                for (int64_t x = 0; x < shape[2]; ++x) {
                    double best = kEdtFar;
                    for (const auto& p : pts) {
                        const double dz = (z - p[0]) * spacing[0];
                        const double dy = (y - p[1]) * spacing[1];
                        const double dx = (x - p[2]) * spacing[2];
                        best = std::min(best, dz * dz + dy * dy + dx * dx);
                    }
                    const double got = field[(z * shape[1] + y) * shape[2] + x];
                    CHECK(got == doctest::Approx(best).epsilon(1e-12));
                }
    }
}

TEST_CASE("squared_edt: no seeds leaves the field far everywhere") {
    const std::array<int64_t, 3> shape{3, 3, 3};
    std::vector<double> field(27, kEdtFar);
    squared_edt(shape, {1, 1, 1}, field);
    for (double v : field) CHECK(v >= kEdtFar * 0.5);
}

TEST_CASE("nsd: rejects non-positive tolerance") {
    LabelVolume a = binary_volume({3, 3, 3});
    a.at(1, 1, 1) = 1;
    CHECK_THROWS_AS(nsd(a, a, 1, -1.0), validation_error);
    CHECK_THROWS_AS(nsd(a, a, 1, 0.0), validation_error);
}
