#ifndef COBRA_PREPROCESS_HPP
#define COBRA_PREPROCESS_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "cobra/tensor.hpp"
#include "cobra/volume.hpp"

namespace cobra {

// Intensity window (grey-level mapping): width W and level L in HU.
struct WindowSpec {
    double width = 400.0;
    double level = 50.0;

    void validate() const {
        if (!(width > 0)) throw validation_error("window: width must be > 0");
    }
};

// The two contrast channels the network consumes, in channel order.
inline constexpr WindowSpec kSoftTissueWindow{400.0, 50.0};  // channel 0
inline constexpr WindowSpec kPancreasWindow{100.0, 60.0};    // channel 1

// Network input resolution (depth, height, width).
inline constexpr std::array<int64_t, 3> kNetworkShape{96, 192, 192};

// Internal label scheme: air 0, body 1, then the organ labels shifted up.
inline constexpr int kInternalClassCount = 6;
// On-disk / metric label scheme: background 0, liver 1, kidney 2, spleen 3,
// pancreas 4.
inline constexpr int kOutputClassCount = 5;

// clamp((x - (L - W/2)) / W, 0, 1) per voxel. Total and monotone in x.
Tensor window_normalize(const Volume& v, const WindowSpec& w);

// Stacks the two windows into a (2, 96, 192, 192) tensor; v must already be
// at kNetworkShape.
Tensor make_input_channels(const Volume& v);

// Body segmentation on the raw CT: threshold at -200 HU, binary closing with
// a 3x3x3 6-connected cross, then 3D hole filling (flood fill from the
// volume border over the complement). 1 = body, 0 = air.
LabelVolume compute_body_mask(const Volume& v);

// Remaps FLARE labels {0 bg, 1 liver, 2 kidney, 3 spleen, 4 pancreas} to the
// internal 6-class scheme: organs shift +1; background splits into air (0)
// and body (1) using the mask. Organ labels win over the mask.
LabelVolume split_background(const LabelVolume& lv, const LabelVolume& body_mask);

}  // namespace cobra

#endif
