#ifndef COBRA_POSTPROCESS_HPP
#define COBRA_POSTPROCESS_HPP

#include <cstdint>
#include <vector>

#include "cobra/tensor.hpp"
#include "cobra/volume.hpp"

namespace cobra {

// Per-voxel argmax over the channel axis of a (C,D,H,W) tensor. Ties break
// toward the lowest channel index.
LabelVolume argmax_channels(const Tensor& logits, const Geometry& geom);

// Nearest-neighbour upsampling of a label map to `target_shape` (the
// half-open center convention shared with image resampling). Spacing is
// rescaled by the shape ratio; origin is unchanged.
LabelVolume upsample_nearest(const LabelVolume& lv, const std::array<int64_t, 3>& target_shape);

// Collapses the network's 6-class convention (0 outside body, 1 body
// background, 2..5 organs) to the export convention (0 background, 1..4
// organs): {0,1} -> 0, k -> k-1 otherwise. Throws on voxels outside 0..5.
LabelVolume remap_labels(const LabelVolume& lv);

}  // namespace cobra

#endif
