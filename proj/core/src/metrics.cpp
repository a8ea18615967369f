#include "cobra/metrics.hpp"

#include <algorithm>
#include <limits>

namespace cobra {

namespace {

void check_geometry(const LabelVolume& pred, const LabelVolume& gold) {
    if (pred.geom.shape != gold.geom.shape)
        throw validation_error("metrics: shape mismatch between prediction and reference");
    if (pred.geom.spacing != gold.geom.spacing)
        throw validation_error("metrics: spacing mismatch between prediction and reference");
}

// 1D squared-distance transform along one line of samples at positions
// i * step. f is read as the per-sample seed cost and overwritten with the
// lower envelope min_i ((q-i)²·step² + f[i]).
void dt_line(double* f, int64_t n, int64_t stride, double step, double* v_pos,
             int64_t* v_idx, double* z, double* scratch) {
    for (int64_t i = 0; i < n; ++i) scratch[i] = f[i * stride];

    int64_t k = 0;
    v_idx[0] = 0;
    v_pos[0] = 0.0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();

    for (int64_t q = 1; q < n; ++q) {
        const double qp = q * step;
        double s = 0;
        while (true) {
            const double vp = v_pos[k];
            s = ((scratch[q] + qp * qp) - (scratch[v_idx[k]] + vp * vp)) / (2 * (qp - vp));
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v_idx[k] = q;
        v_pos[k] = qp;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }

    k = 0;
    for (int64_t q = 0; q < n; ++q) {
        const double qp = q * step;
        while (z[k + 1] < qp) ++k;
        const double d = qp - v_pos[k];
        f[q * stride] = d * d + scratch[v_idx[k]];
    }
}

}  // namespace

void squared_edt(const std::array<int64_t, 3>& shape, const std::array<double, 3>& spacing,
                 std::vector<double>& field) {
    const int64_t D = shape[0], H = shape[1], W = shape[2];
    if (static_cast<int64_t>(field.size()) != D * H * W)
        throw validation_error("edt: field length does not match shape");

    const int64_t nmax = std::max({D, H, W});
    std::vector<double> v_pos(nmax), z(nmax + 1), scratch(nmax);
    std::vector<int64_t> v_idx(nmax);

    // x lines
    for (int64_t zi = 0; zi < D; ++zi)
        for (int64_t y = 0; y < H; ++y)
            dt_line(field.data() + (zi * H + y) * W, W, 1, spacing[2], v_pos.data(),
                    v_idx.data(), z.data(), scratch.data());
    // y lines
    for (int64_t zi = 0; zi < D; ++zi)
        for (int64_t x = 0; x < W; ++x)
            dt_line(field.data() + zi * H * W + x, H, W, spacing[1], v_pos.data(),
                    v_idx.data(), z.data(), scratch.data());
    // z lines
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            dt_line(field.data() + y * W + x, D, H * W, spacing[0], v_pos.data(),
                    v_idx.data(), z.data(), scratch.data());
}

std::vector<uint8_t> class_surface(const LabelVolume& lv, int k) {
    const int64_t D = lv.geom.shape[0], H = lv.geom.shape[1], W = lv.geom.shape[2];
    std::vector<uint8_t> surf(static_cast<size_t>(D * H * W), 0);
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                if (lv.at(z, y, x) != k) continue;
                const bool boundary =
                    z == 0 || lv.at(z - 1, y, x) != k || z == D - 1 || lv.at(z + 1, y, x) != k ||
                    y == 0 || lv.at(z, y - 1, x) != k || y == H - 1 || lv.at(z, y + 1, x) != k ||
                    x == 0 || lv.at(z, y, x - 1) != k || x == W - 1 || lv.at(z, y, x + 1) != k;
                if (boundary) surf[(z * H + y) * W + x] = 1;
            }
    return surf;
}

double dsc(const LabelVolume& pred, const LabelVolume& gold, int k) {
    check_geometry(pred, gold);
    int64_t p = 0, g = 0, both = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool in_p = pred.data[i] == k;
        const bool in_g = gold.data[i] == k;
        p += in_p;
        g += in_g;
        both += in_p && in_g;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double nsd(const LabelVolume& pred, const LabelVolume& gold, int k, double tolerance_mm) {
    check_geometry(pred, gold);
    if (!(tolerance_mm > 0)) throw validation_error("nsd: tolerance must be > 0");

    const auto sp = class_surface(pred, k);
    const auto sg = class_surface(gold, k);
    const int64_t np = std::count(sp.begin(), sp.end(), uint8_t{1});
    const int64_t ng = std::count(sg.begin(), sg.end(), uint8_t{1});
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;

    const double tau2 = tolerance_mm * tolerance_mm;
    const auto count_within = [&](const std::vector<uint8_t>& from,
                                  const std::vector<uint8_t>& to) {
        std::vector<double> field(to.size());
        for (size_t i = 0; i < to.size(); ++i) field[i] = to[i] ? 0.0 : kEdtFar;
        squared_edt(pred.geom.shape, pred.geom.spacing, field);
        int64_t hits = 0;
        for (size_t i = 0; i < from.size(); ++i)
            if (from[i] && field[i] <= tau2) ++hits;
        return hits;
    };

    const int64_t hits = count_within(sp, sg) + count_within(sg, sp);
    return static_cast<double>(hits) / static_cast<double>(np + ng);
}

}  // namespace cobra
