#include "cobra/postprocess.hpp"

#include "cobra/resample.hpp"

namespace cobra {

LabelVolume argmax_channels(const Tensor& logits, const Geometry& geom) {
    const auto& d = logits.dims();
    if (d.size() != 4) throw validation_error("argmax: expected a (C,D,H,W) tensor");
    const int64_t C = d[0];
    if (C < 1 || C > 255) throw validation_error("argmax: channel count out of range");
    if (d[1] != geom.shape[0] || d[2] != geom.shape[1] || d[3] != geom.shape[2])
        throw validation_error("argmax: tensor spatial dims do not match geometry");

    LabelVolume out(geom, static_cast<int>(C));
    const int64_t vox = geom.voxel_count();
    const float* p = logits.data();
    for (int64_t i = 0; i < vox; ++i) {
        int best = 0;
        float best_v = p[i];
        for (int64_t c = 1; c < C; ++c) {
            const float v = p[c * vox + i];
            if (v > best_v) {
                best_v = v;
                best = static_cast<int>(c);
            }
        }
        out.data[i] = static_cast<uint8_t>(best);
    }
    return out;
}

LabelVolume upsample_nearest(const LabelVolume& lv,
                             const std::array<int64_t, 3>& target_shape) {
    return resample_labels_nearest(lv, target_shape);
}

LabelVolume remap_labels(const LabelVolume& lv) {
    lv.validate();
    if (lv.class_count > 6)
        throw validation_error("remap: expected at most 6 classes, got " +
                               std::to_string(lv.class_count));
    LabelVolume out(lv.geom, 5);
    for (size_t i = 0; i < lv.data.size(); ++i) {
        const uint8_t v = lv.data[i];
        out.data[i] = v <= 1 ? 0 : static_cast<uint8_t>(v - 1);
    }
    return out;
}

}  // namespace cobra
