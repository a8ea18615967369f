#ifndef COBRA_NIFTI_IO_HPP
#define COBRA_NIFTI_IO_HPP

#include <string>

#include "cobra/volume.hpp"

namespace cobra {

// NIfTI-1 single-file I/O, restricted to what the pipeline needs: 3D images,
// datatypes int16 / uint8 / float32, little-endian, optional gzip container
// (detected on read by the 0x1f 0x8b magic; chosen on write by a ".gz"
// suffix). qform/sform orientation beyond voxel spacing is ignored.

// Reads intensities into 32-bit reals, applying scl_slope/scl_inter
// (slope 0 means "no scaling"). Throws io_error on missing/unreadable files
// and validation_error on malformed or unsupported headers.
Volume read_volume(const std::string& path);

// Writes float32 with identity scaling; round-trips bit-exactly.
void write_volume(const Volume& v, const std::string& path);

// Integer labels, no scaling. Accepts uint8 or int16 payloads; any float
// datatype is a validation error. Values must be < class_count.
LabelVolume read_labels(const std::string& path, int class_count);

// Writes uint8.
void write_labels(const LabelVolume& lv, const std::string& path);

}  // namespace cobra

#endif
