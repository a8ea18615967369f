#ifndef COBRA_VOLUME_HPP
#define COBRA_VOLUME_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cobra/errors.hpp"

namespace cobra {

// Voxel-grid geometry shared by images and label maps. Axis order is
// (z, y, x) with x fastest-varying, matching NIfTI storage. Orientation
// matrices are deliberately not modeled: the pipeline is resolution- and
// intensity-driven, so spacing and origin are enough.
struct Geometry {
    std::array<int64_t, 3> shape{1, 1, 1};    // (depth, height, width) voxels
    std::array<double, 3> spacing{1, 1, 1};   // (sz, sy, sx) mm per voxel
    std::array<double, 3> origin{0, 0, 0};    // (oz, oy, ox) mm

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (shape[a] < 1) throw validation_error("geometry: shape components must be >= 1");
            if (!(spacing[a] > 0)) throw validation_error("geometry: spacing must be > 0");
        }
    }

    int64_t voxel_count() const { return shape[0] * shape[1] * shape[2]; }
    bool operator==(const Geometry&) const = default;
};

// A 3D scalar field of CT intensities in Hounsfield units.
struct Volume {
    Geometry geom;
    std::vector<float> data;  // length = depth * height * width

    Volume() = default;
    Volume(Geometry g, float fill = 0.0f) : geom(g), data() {
        g.validate();
        data.assign(static_cast<size_t>(g.voxel_count()), fill);
    }

    void validate() const {
        geom.validate();
        if (static_cast<int64_t>(data.size()) != geom.voxel_count())
            throw validation_error("volume: data length does not match shape");
    }

    float& at(int64_t z, int64_t y, int64_t x) {
        return data[(z * geom.shape[1] + y) * geom.shape[2] + x];
    }
    float at(int64_t z, int64_t y, int64_t x) const {
        return data[(z * geom.shape[1] + y) * geom.shape[2] + x];
    }
};

// A 3D field of class labels on the same grid model. class_count is the
// declared K; every voxel must be < K.
struct LabelVolume {
    Geometry geom;
    std::vector<uint8_t> data;
    int class_count = 2;

    LabelVolume() = default;
    LabelVolume(Geometry g, int k, uint8_t fill = 0) : geom(g), class_count(k) {
        g.validate();
        if (k < 1) throw validation_error("labels: class count must be >= 1");
        if (fill >= k) throw validation_error("labels: fill value out of range");
        data.assign(static_cast<size_t>(g.voxel_count()), fill);
    }

    void validate() const {
        geom.validate();
        if (class_count < 1) throw validation_error("labels: class count must be >= 1");
        if (static_cast<int64_t>(data.size()) != geom.voxel_count())
            throw validation_error("labels: data length does not match shape");
        for (uint8_t v : data)
            if (v >= class_count)
                throw validation_error("labels: voxel value " + std::to_string(int(v)) +
                                       " out of range for K=" + std::to_string(class_count));
    }

    uint8_t& at(int64_t z, int64_t y, int64_t x) {
        return data[(z * geom.shape[1] + y) * geom.shape[2] + x];
    }
    uint8_t at(int64_t z, int64_t y, int64_t x) const {
        return data[(z * geom.shape[1] + y) * geom.shape[2] + x];
    }
};

}  // namespace cobra

#endif
