#ifndef COBRA_RESAMPLE_HPP
#define COBRA_RESAMPLE_HPP

#include <array>
#include <cstdint>

#include "cobra/volume.hpp"

namespace cobra {

// Grid resampling. Both directions use the same center-based coordinate
// convention: output voxel i samples source coordinate
//
//   src(i) = (i + 0.5) * n_in / n_out - 0.5
//
// so voxel centers line up when shapes match and spacing rescales by the
// shape ratio (origin is unchanged). Boundaries clamp to the edge.

// Cubic B-spline resampling (order 3) with exact prefiltering, or trilinear
// (order 1). When an in-plane axis (y or x) is downsampled by factor f > 1,
// a Gaussian blur with sigma = f/2 voxels (radius 4*sigma) runs along that
// axis first to suppress aliasing; the through-plane axis is never blurred.
// Axes of extent 1 cannot support interpolation and pass through as
// constants; *degenerate_axis_warning is set when that happens.
Volume resample_image(const Volume& v, const std::array<int64_t, 3>& target_shape,
                      int order = 3, bool* degenerate_axis_warning = nullptr);

// Nearest-neighbour label resampling: each output voxel copies the input
// voxel whose center is nearest to the back-projected output center (exact
// half-way ties resolve toward the lower index). Never invents labels.
LabelVolume resample_labels_nearest(const LabelVolume& lv,
                                    const std::array<int64_t, 3>& target_shape);

}  // namespace cobra

#endif
