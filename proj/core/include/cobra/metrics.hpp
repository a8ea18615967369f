#ifndef COBRA_METRICS_HPP
#define COBRA_METRICS_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "cobra/volume.hpp"

namespace cobra {

// Dice similarity coefficient for class k: 2|P∩G| / (|P|+|G|). Both masks
// empty -> 1.0. Requires equal shapes and spacings (origins are not
// compared: metrics operate in the common voxel grid).
double dsc(const LabelVolume& pred, const LabelVolume& gold, int k);

// Normalized surface distance at tolerance tau (mm): the fraction of
// boundary voxels of either mask lying within tau of the other mask's
// boundary. Surfaces are 6-connected boundary voxel centers (a voxel of the
// class with some 6-neighbour of a different class; volume borders count as
// different), distances Euclidean in mm via spacing. Both surfaces empty ->
// 1.0; exactly one empty -> 0.0. Comparison is d² ≤ τ², inclusive.
double nsd(const LabelVolume& pred, const LabelVolume& gold, int k, double tolerance_mm);

// Boundary-voxel indicator for class k under the convention above
// (1 = surface voxel), length = voxel count.
std::vector<uint8_t> class_surface(const LabelVolume& lv, int k);

// Exact squared Euclidean distance transform (Felzenszwalb/Huttenlocher
// lower-envelope scan per axis) with anisotropic voxel spacing. On input,
// `field` holds 0 at seed voxels and kEdtFar elsewhere; on output it holds
// the squared mm distance to the nearest seed (kEdtFar when there is none).
inline constexpr double kEdtFar = 1e30;
void squared_edt(const std::array<int64_t, 3>& shape, const std::array<double, 3>& spacing,
                 std::vector<double>& field);

}  // namespace cobra

#endif
