#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "cobra/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cobra;

namespace {

// Scalar re-derivation of the weighted soft Dice loss, straight from the
// formula with no shared code.
double dice_loss_scalar(const Tensor& p, const Tensor& g, const std::vector<double>& w,
                        double eps) {
    const int64_t K = p.dim(0);
    const int64_t vox = p.numel() / K;
    double num = 0.0, den = 0.0;
    for (int64_t c = 0; c < K; ++c) {
        double pg = 0.0, pp = 0.0, gg = 0.0;
        for (int64_t i = 0; i < vox; ++i) {
            const double pv = p.data()[c * vox + i];
            const double gv = g.data()[c * vox + i];
            pg += pv * gv;
            pp += pv * pv;
            gg += gv * gv;
        }
        const double d = (2.0 * pg + eps) / (pp + gg + eps);
        num += w[c] * d;
        den += w[c];
    }
    return 1.0 - num / den;
}

Tensor probs_for(const std::array<int64_t, 3>& shape, int64_t K, uint64_t seed) {
    const Tensor logits =
        synthetic::random_tensor({K, shape[0], shape[1], shape[2]}, seed, -2.0f, 2.0f);
    return softmax_channels(logits);
}

LabelVolume labels_for(const std::array<int64_t, 3>& shape, int64_t K, uint64_t seed) {
    return synthetic::random_labels(shape, static_cast<int>(K), seed);
}

}  // namespace

TEST_CASE("softmax: channel sums are 1, values positive, order preserved") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        const Tensor logits = synthetic::random_tensor({5, 3, 4, 4}, seed, -4.0f, 4.0f);
        const Tensor p = softmax_channels(logits);
        REQUIRE(p.dims() == logits.dims());

        const int64_t vox = 3 * 4 * 4;
        for (int64_t i = 0; i < vox; ++i) {
            double sum = 0.0;
            for (int64_t c = 0; c < 5; ++c) {
                const float v = p.data()[c * vox + i];
                CHECK(v > 0.0f);
                CHECK(v < 1.0f);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));

            // Larger logit, larger probability.
            for (int64_t c = 1; c < 5; ++c) {
                const bool logit_less =
                    logits.data()[(c - 1) * vox + i] < logits.data()[c * vox + i];
                const bool prob_less = p.data()[(c - 1) * vox + i] < p.data()[c * vox + i];
                CHECK(logit_less == prob_less);
            }
        }
    }
}

TEST_CASE("softmax: invariant under per-voxel logit shifts") {
    const Tensor logits = synthetic::random_tensor({4, 2, 3, 3}, 9, -3.0f, 3.0f);
    Tensor shifted = logits;
    const int64_t vox = 2 * 3 * 3;
    for (int64_t i = 0; i < vox; ++i)
        for (int64_t c = 0; c < 4; ++c) shifted.data()[c * vox + i] += 7.5f;

    const Tensor a = softmax_channels(logits);
    const Tensor b = softmax_channels(shifted);
    for (int64_t i = 0; i < a.numel(); ++i)
        CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-5));
}

TEST_CASE("softmax: equal logits give uniform probabilities, huge gaps saturate") {
    Tensor logits({3, 1, 1, 2}, 0.0f);
    logits.at(0, 0, 0, 1) = 60.0f;  // dominated voxel 1

    const Tensor p = softmax_channels(logits);
    for (int64_t c = 0; c < 3; ++c)
        CHECK(p.at(c, 0, 0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(p.at(0, 0, 0, 1) == doctest::Approx(1.0));
    CHECK(p.at(1, 0, 0, 1) == doctest::Approx(0.0));
}

TEST_CASE("one_hot: a single exact 1 per voxel, at the labeled channel") {
    const LabelVolume lv = labels_for({3, 4, 5}, 6, 21);
    const Tensor oh = one_hot(lv);
    REQUIRE(oh.dims() == std::vector<int64_t>{6, 3, 4, 5});

    const int64_t vox = 3 * 4 * 5;
    for (int64_t i = 0; i < vox; ++i) {
        int ones = 0;
        for (int64_t c = 0; c < 6; ++c) {
            const float v = oh.data()[c * vox + i];
            CHECK((v == 0.0f || v == 1.0f));
            if (v == 1.0f) {
                ++ones;
                CHECK(c == lv.data[static_cast<size_t>(i)]);
            }
        }
        CHECK(ones == 1);
    }
}

TEST_CASE("inverse_frequency_weights: rarer classes weigh more") {
    Geometry g;
    g.shape = {1, 1, 8};
    LabelVolume lv(g, 3, 0);
    // Class 0: 5 voxels, class 1: 2, class 2: 1.
    lv.at(0, 0, 5) = 1;
    lv.at(0, 0, 6) = 1;
    lv.at(0, 0, 7) = 2;

    const auto w = inverse_frequency_weights(lv);
    REQUIRE(w.size() == 3);
    CHECK(w[0] < w[1]);
    CHECK(w[1] < w[2]);
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(3.0));
    // Proportional to 1/count: ratios are exact.
    CHECK(w[2] / w[0] == doctest::Approx(5.0));
    CHECK(w[2] / w[1] == doctest::Approx(2.0));
}

TEST_CASE("inverse_frequency_weights: absent classes get the largest present weight") {
    Geometry g;
    g.shape = {1, 1, 4};
    LabelVolume lv(g, 4, 0);
    lv.at(0, 0, 0) = 2;  // classes 1 and 3 absent; 0 has 3 voxels, 2 has 1

    const auto w = inverse_frequency_weights(lv);
    REQUIRE(w.size() == 4);
    CHECK(w[1] == doctest::Approx(w[2]));
    CHECK(w[3] == doctest::Approx(w[2]));
    CHECK(w[0] < w[2]);
    CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(4.0));
}

TEST_CASE("loss spec: validation") {
    LossSpec spec = LossSpec::uniform(4);
    CHECK_NOTHROW(spec.validate(4));

    SUBCASE("wrong length") {
        CHECK_THROWS_AS(spec.validate(5), validation_error);
    }
    SUBCASE("negative weight") {
        spec.weights[1] = -0.5;
        CHECK_THROWS_AS(spec.validate(4), validation_error);
    }
    SUBCASE("all-zero weights") {
        spec.weights.assign(4, 0.0);
        CHECK_THROWS_AS(spec.validate(4), validation_error);
    }
    SUBCASE("non-positive epsilon") {
        spec.epsilon = 0.0;
        CHECK_THROWS_AS(spec.validate(4), validation_error);
    }
}

TEST_CASE("soft dice loss: perfect one-hot prediction scores ~0") {
    const LabelVolume lv = labels_for({4, 4, 4}, 5, 2);
    const Tensor oh = one_hot(lv);
    const double loss = weighted_soft_dice_loss(oh, oh, LossSpec::uniform(5));
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-6);
}

TEST_CASE("soft dice loss: an always-wrong prediction scores ~1") {
    Geometry g;
    g.shape = {2, 4, 4};
    LabelVolume truth(g, 2, 0);
    LabelVolume wrong(g, 2, 1);
    const double loss =
        weighted_soft_dice_loss(one_hot(wrong), one_hot(truth), LossSpec::uniform(2));
    CHECK(loss > 0.999);
    CHECK(loss <= 1.0);
}

TEST_CASE("soft dice loss: matches the scalar re-derivation") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const std::array<int64_t, 3> shape{3, 4, 4};
        const int64_t K = 4;
        const Tensor p = probs_for(shape, K, seed);
        const Tensor oh = one_hot(labels_for(shape, K, seed + 60));

        LossSpec uniform = LossSpec::uniform(K);
        CHECK(weighted_soft_dice_loss(p, oh, uniform) ==
              doctest::Approx(dice_loss_scalar(p, oh, uniform.weights, uniform.epsilon))
                  .epsilon(1e-12));

        LossSpec skewed{{0.1, 2.0, 0.7, 1.2}, 1e-5};
        CHECK(weighted_soft_dice_loss(p, oh, skewed) ==
              doctest::Approx(dice_loss_scalar(p, oh, skewed.weights, skewed.epsilon))
                  .epsilon(1e-12));
    }
}

TEST_CASE("soft dice loss: stays in [0, 1] and rejects bad targets") {
    const std::array<int64_t, 3> shape{3, 3, 3};
    const Tensor p = probs_for(shape, 3, 5);
    const Tensor oh = one_hot(labels_for(shape, 3, 6));

    const double loss = weighted_soft_dice_loss(p, oh, LossSpec::uniform(3));
    CHECK(loss >= 0.0);
    CHECK(loss <= 1.0);

    SUBCASE("non-binary target") {
        Tensor bad = oh;
        bad.data()[0] = 0.5f;
        bad.data()[27] = 0.5f;  // keep the channel sum at 1
        CHECK_THROWS_AS(weighted_soft_dice_loss(p, bad, LossSpec::uniform(3)),
                        validation_error);
    }
    SUBCASE("channel sum != 1") {
        Tensor bad = oh;
        for (int64_t c = 0; c < 3; ++c) bad.data()[c * 27] = 0.0f;
        CHECK_THROWS_AS(weighted_soft_dice_loss(p, bad, LossSpec::uniform(3)),
                        validation_error);
    }
    SUBCASE("shape mismatch") {
        const Tensor small = probs_for({2, 3, 3}, 3, 7);
        CHECK_THROWS_AS(weighted_soft_dice_loss(small, oh, LossSpec::uniform(3)),
                        validation_error);
    }
}

TEST_CASE("soft dice grad: matches central finite differences") {
    const std::array<int64_t, 3> shape{4, 4, 4};
    const int64_t K = 6;
    const Tensor p = probs_for(shape, K, 31);
    const Tensor oh = one_hot(labels_for(shape, K, 32));
    LossSpec spec{{1.0, 0.25, 2.0, 0.5, 1.5, 0.75}, 1e-5};

    const Tensor analytic = soft_dice_grad(p, oh, spec);
    const Tensor numeric = oracle::finite_difference_grad(
        p, [&](const Tensor& t) { return weighted_soft_dice_loss(t, oh, spec); });

    double max_rel = 0.0;
    for (int64_t i = 0; i < analytic.numel(); ++i) {
        const double a = analytic.data()[i];
        const double n = numeric.data()[i];
        const double rel = std::abs(a - n) / std::max(1e-6, std::abs(n));
        max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("soft dice grad: zero-weight classes get zero gradient") {
    const std::array<int64_t, 3> shape{3, 3, 3};
    const Tensor p = probs_for(shape, 3, 41);
    const Tensor oh = one_hot(labels_for(shape, 3, 42));
    LossSpec spec{{1.0, 0.0, 1.0}, 1e-5};

    const Tensor g = soft_dice_grad(p, oh, spec);
    const int64_t vox = 27;
    for (int64_t i = 0; i < vox; ++i) CHECK(g.data()[1 * vox + i] == 0.0f);
}

TEST_CASE("soft dice loss/grad: invariant under weight rescaling") {
    const std::array<int64_t, 3> shape{3, 3, 3};
    const Tensor p = probs_for(shape, 4, 51);
    const Tensor oh = one_hot(labels_for(shape, 4, 52));

    LossSpec a{{1.0, 2.0, 0.5, 1.5}, 1e-5};
    LossSpec b{{3.0, 6.0, 1.5, 4.5}, 1e-5};  // same weights scaled by 3

    CHECK(weighted_soft_dice_loss(p, oh, a) ==
          doctest::Approx(weighted_soft_dice_loss(p, oh, b)).epsilon(1e-12));

    const Tensor ga = soft_dice_grad(p, oh, a);
    const Tensor gb = soft_dice_grad(p, oh, b);
    for (int64_t i = 0; i < ga.numel(); ++i)
        CHECK(ga.data()[i] == doctest::Approx(gb.data()[i]).epsilon(1e-6));
}

TEST_CASE("augment_shift: pure relabeling of coordinates, exact round-trip") {
    Geometry g;
    g.shape = {5, 6, 7};
    Volume v(g);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(i) - 100.0f;

    const Volume s = augment_shift(v, 1, -2, 3);
    // out(z,y,x) = in(z-1, y+2, x-3); vacated space becomes air.
    CHECK(s.at(1, 0, 3) == v.at(0, 2, 0));
    CHECK(s.at(4, 3, 6) == v.at(3, 5, 3));
    CHECK(s.at(0, 0, 0) == -1024.0f);  // z=0 was vacated
    CHECK(s.at(2, 5, 0) == -1024.0f);  // y=5 maps to y=7, out of range

    // Voxels whose round trip stays in range survive bit-exactly.
    const Volume back = augment_shift(s, -1, 2, -3);
    for (int64_t z = 0; z < 4; ++z)
        for (int64_t y = 2; y < 6; ++y)
            for (int64_t x = 0; x < 4; ++x) CHECK(back.at(z, y, x) == v.at(z, y, x));

    // Zero shift is the identity.
    const Volume same = augment_shift(v, 0, 0, 0);
    CHECK(same.data == v.data);
}

TEST_CASE("augment_shift: labels shift with zero fill") {
    const LabelVolume lv = labels_for({4, 4, 4}, 5, 61);
    const LabelVolume s = augment_shift(lv, 0, 1, 0);
    CHECK(s.at(0, 1, 0) == lv.at(0, 0, 0));
    for (int64_t z = 0; z < 4; ++z)
        for (int64_t x = 0; x < 4; ++x) CHECK(s.at(z, 0, x) == 0);
}

TEST_CASE("augment_shift: rejects displacements beyond the extent") {
    Geometry g;
    g.shape = {4, 4, 4};
    Volume v(g);
    CHECK_THROWS_AS(augment_shift(v, 5, 0, 0), validation_error);
    CHECK_THROWS_AS(augment_shift(v, 0, -5, 0), validation_error);
    CHECK_NOTHROW(augment_shift(v, 4, 0, 0));  // full shift: everything vacated
}

TEST_CASE("augment_rotate_inplane: zero rotation is exact identity") {
    const Volume v = synthetic::body_phantom({6, 16, 16});
    const Volume r = augment_rotate_inplane(v, 0.0);
    CHECK(r.data == v.data);

    const LabelVolume lv = labels_for({4, 8, 8}, 3, 71);
    const LabelVolume rl = augment_rotate_inplane(lv, 0.0);
    CHECK(rl.data == lv.data);
}

TEST_CASE("augment_rotate_inplane: +10 then -10 degrees approximately restores a blob") {
    // Smooth blob so trilinear interpolation error stays small.
    Geometry g;
    g.shape = {3, 24, 24};
    Volume v(g, -1024.0f);
    for (int64_t z = 0; z < 3; ++z)
        for (int64_t y = 0; y < 24; ++y)
            for (int64_t x = 0; x < 24; ++x) {
                const double dy = (y - 11.5) / 8.0, dx = (x - 11.5) / 8.0;
                v.at(z, y, x) = static_cast<float>(200.0 * std::exp(-(dy * dy + dx * dx)));
            }

    const Volume back = augment_rotate_inplane(augment_rotate_inplane(v, 10.0), -10.0);
    // Compare well inside the volume where neither rotation clipped.
    for (int64_t y = 8; y < 16; ++y)
        for (int64_t x = 8; x < 16; ++x)
            CHECK(back.at(1, y, x) ==
                  doctest::Approx(v.at(1, y, x)).epsilon(0.05).scale(200.0));
}

TEST_CASE("augment_rotate_inplane: 90 degrees maps axes onto each other") {
    // A distinctive voxel off-center: after 90°, it lands where sampling the
    // source at the rotated coordinate finds it.
    Geometry g;
    g.shape = {1, 5, 5};
    Volume v(g, 0.0f);
    v.at(0, 1, 3) = 77.0f;

    const Volume r = augment_rotate_inplane(v, 90.0);
    // At 90 degrees the 5x5 grid maps onto itself, so the mass moves but
    // none of it is clipped or interpolated away.
    double mass_in = 0.0, mass_out = 0.0;
    for (float f : v.data) mass_in += f;
    for (float f : r.data) mass_out += f;
    CHECK(mass_out == doctest::Approx(mass_in).epsilon(1e-3));

    // And exactly one voxel holds the value (grid maps to grid at 90°).
    int hits = 0;
    for (float f : r.data) hits += f == 77.0f;
    CHECK(hits == 1);
}

TEST_CASE("augment_rotate_inplane: labels keep their value set") {
    const LabelVolume lv = labels_for({3, 10, 10}, 4, 81);
    const LabelVolume r = augment_rotate_inplane(lv, 23.0);

    std::set<uint8_t> in(lv.data.begin(), lv.data.end());
    in.insert(0);  // fill value
    for (uint8_t v : r.data) CHECK(in.count(v) == 1);
    CHECK(r.class_count == lv.class_count);
}

TEST_CASE("augment_scale: scale 1 is exact identity") {
    const Volume v = synthetic::body_phantom({5, 12, 12});
    const Volume s = augment_scale(v, 1.0);
    CHECK(s.data == v.data);

    const LabelVolume lv = labels_for({4, 6, 6}, 3, 91);
    const LabelVolume sl = augment_scale(lv, 1.0);
    CHECK(sl.data == lv.data);
}

TEST_CASE("augment_scale: zooming in magnifies the center") {
    // Center voxel keeps its value; a blob covers more voxels at s=2.
    Geometry g;
    g.shape = {5, 15, 15};
    Volume v(g, -1024.0f);
    for (int64_t z = 1; z < 4; ++z)
        for (int64_t y = 6; y < 9; ++y)
            for (int64_t x = 6; x < 9; ++x) v.at(z, y, x) = 100.0f;

    const Volume zoomed = augment_scale(v, 2.0);
    CHECK(zoomed.at(2, 7, 7) == doctest::Approx(100.0f));

    int64_t before = 0, after = 0;
    for (float f : v.data) before += f > -400.0f;
    for (float f : zoomed.data) after += f > -400.0f;
    CHECK(after > before);
}

TEST_CASE("augment_scale: parameter validation") {
    Geometry g;
    g.shape = {4, 4, 4};
    Volume v(g);
    CHECK_THROWS_AS(augment_scale(v, 0.0), validation_error);
    CHECK_THROWS_AS(augment_scale(v, -1.0), validation_error);
    CHECK_THROWS_AS(augment_scale(v, 4.5), validation_error);
    CHECK_NOTHROW(augment_scale(v, 4.0));

    CHECK_THROWS_AS(augment_rotate_inplane(v, 181.0), validation_error);
    CHECK_THROWS_AS(augment_rotate_inplane(v, -180.5), validation_error);
    CHECK_NOTHROW(augment_rotate_inplane(v, 180.0));
    CHECK_NOTHROW(augment_rotate_inplane(v, -180.0));
}
