#ifndef COBRA_MODEL_HPP
#define COBRA_MODEL_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cobra/passes.hpp"

namespace cobra {

// Architecture hyperparameters. Checked into the repo as a key = value text
// file (configs/cobra-reference); the widths are data so the parameter
// budget can be retuned without touching the builder.
struct ArchConfig {
    int64_t input_channels = 2;
    int64_t class_count = 6;
    int64_t levels = 4;
    std::vector<int64_t> widths{24, 96, 160, 160};
    int64_t bottleneck_factor_default = 2;
    int64_t bottleneck_factor_wide = 4;
    std::array<int64_t, 3> input_shape{96, 192, 192};

    void validate() const;

    // Factor 4 at the widest level(s), 2 elsewhere.
    int64_t factor_for(int64_t width) const;

    static ArchConfig reference() { return ArchConfig{}; }
    static ArchConfig load(const std::string& path);
    void save(const std::string& path) const;
};

enum class WeightInit : uint8_t { zeros, he_normal };

// Builds the full network as a Graph:
//   stem: 7x7x7 stride-2 convolution (factorized per axis);
//   encoder: per level a residual bottleneck block (1x1x1 reduce, factorized
//     double 3x3x3 convolution, 1x1x1 restore, projection shortcut where
//     channels or resolution change), stride-2 on the first triplet of
//     levels 1+;
//   decoder: bottlenecked 2x2x2 stride-2 transpose convolutions, skip
//     concatenations, mirrored blocks;
//   head: 1x1x1 convolution to class_count at half resolution, then a final
//     2x2x2 stride-2 transpose convolution back to the input resolution.
// factorize=false keeps cubic kernels (debug aid). he_normal weights are
// deterministic in seed; biases are always zero-initialized.
Model build_cobra(const ArchConfig& cfg, bool factorize = true,
                  WeightInit init = WeightInit::he_normal, uint64_t seed = 0);

// Rewrites one cubic-kernel conv node (k odd, k >= 3) into the chained
// (k,1,1) -> (1,k,1) -> (1,1,k) triplet. Intermediate channels equal the
// node's output channels; strides and pads split per axis; each 1D conv
// carries a bias. The final (1,1,k) conv keeps the original node id. New
// weights are zero-filled: the rewrite is structural, initialization is a
// separate concern.
void factorize_conv(Graph& g, WeightStore& w, int64_t node_id);

// Total elements across every weight tensor referenced by the graph
// (kernels, biases, constant payloads), each counted once.
int64_t count_params(const Graph& g, const WeightStore& w);

// FLOPs for one forward pass at the graph's declared input dims, under the
// 2-FLOPs-per-multiply-add convention: convolutions cost
// 2*k^3*Cin*Cout*(output spatial voxels) plus one FLOP per output element
// for bias; transpose convolutions the symmetric form with input voxels;
// relu/add (fused or not) cost one FLOP per output element; concatenation
// and constants are free.
int64_t count_flops(const Graph& g, const WeightStore& w);

}  // namespace cobra

#endif
