#ifndef COBRA_PIPELINE_HPP
#define COBRA_PIPELINE_HPP

#include <string>

#include "cobra/graph.hpp"
#include "cobra/tensor.hpp"
#include "cobra/volume.hpp"

namespace cobra {

// Wall-clock breakdown of one run_inference call, in seconds.
struct InferenceStages {
    double preprocess_seconds = 0;   // resample + windowing
    double network_seconds = 0;      // graph execution
    double postprocess_seconds = 0;  // argmax + upsample + remap
    bool degenerate_axis = false;    // some axis had extent 1 during resampling

    double total_seconds() const {
        return preprocess_seconds + network_seconds + postprocess_seconds;
    }
};

// Resamples a raw CT to the network grid (cubic spline, in-plane
// anti-aliasing) and stacks the two contrast windows into the (2,96,192,192)
// input tensor.
Tensor preprocess_to_input(const Volume& ct, bool* degenerate_axis = nullptr);

// Full inference: preprocess -> execute -> argmax -> nearest-neighbour
// upsample to the original grid -> label remap. The result carries exactly
// ct's geometry and labels in {0..4}.
LabelVolume run_inference(const Graph& g, const WeightStore& w, const Volume& ct,
                          int threads, InferenceStages* stages = nullptr);

// Original-geometry sidecar (key = value text) written next to preprocessed
// tensors so postprocessing can restore the scan grid.
void write_geometry_file(const std::string& path, const Geometry& g);
Geometry read_geometry_file(const std::string& path);

}  // namespace cobra

#endif
