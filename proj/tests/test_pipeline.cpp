#include <doctest.h>

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <vector>

#include "cobra/pipeline.hpp"
#include "cobra/preprocess.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace cobra;

namespace {

// Smallest possible "network": one pointwise conv from the 2 window
// channels to the 6 internal classes. Fixed weights make internal class 2
// (the first organ) win in body voxels and class 0 in air (both windows 0
// there).
Model tiny_network() {
    Model m;
    m.graph.inputs.push_back(
        {"input", {2, kNetworkShape[0], kNetworkShape[1], kNetworkShape[2]}});
    Node conv;
    conv.id = 0;
    conv.kind = OpKind::conv;
    conv.inputs = {graph_input_ref(0)};
    conv.conv.in_channels = 2;
    conv.conv.out_channels = 6;
    conv.conv.bias = true;
    conv.weight = "head.w";
    conv.bias = "head.b";
    m.graph.nodes.push_back(conv);
    m.graph.outputs.push_back({"logits", 0});

    Tensor w({6, 2, 1, 1, 1}, 0.0f);
    // Internal class 2 fires on either window channel; the rest stay at 0.
    w.data()[2 * 2 + 0] = 10.0f;
    w.data()[2 * 2 + 1] = 10.0f;
    Tensor b({6}, 0.0f);
    b.data()[0] = 0.5f;  // air default
    m.weights.add("head.w", w);
    m.weights.add("head.b", b);
    m.graph.validate(m.weights);
    return m;
}

}  // namespace

TEST_CASE("geometry file: round-trip preserves every field exactly") {
    testutil::TempDir tmp;
    Geometry g;
    g.shape = {147, 512, 512};
    g.spacing = {2.5, 0.787109375, 0.787109375};
    g.origin = {-347.25, -182.0302734375, 191.0};

    const auto path = tmp.file("geometry.txt");
    write_geometry_file(path, g);
    const Geometry back = read_geometry_file(path);

    CHECK(back.shape == g.shape);
    for (int a = 0; a < 3; ++a) {
        CHECK(back.spacing[a] == g.spacing[a]);  // bit-exact via max precision
        CHECK(back.origin[a] == g.origin[a]);
    }
}

TEST_CASE("geometry file: malformed inputs are rejected") {
    testutil::TempDir tmp;
    const auto path = tmp.file("geometry.txt");

    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_geometry_file(tmp.file("absent.txt")), io_error);
    }
    SUBCASE("missing key") {
        std::ofstream(path) << "shape = 4,4,4\nspacing = 1,1,1\n";  // no origin
        CHECK_THROWS_AS(read_geometry_file(path), validation_error);
    }
    SUBCASE("garbage line") {
        std::ofstream(path) << "shape 4,4,4\n";
        CHECK_THROWS_AS(read_geometry_file(path), validation_error);
    }
    SUBCASE("bad shape") {
        std::ofstream(path) << "shape = 4,0,4\nspacing = 1,1,1\norigin = 0,0,0\n";
        CHECK_THROWS_AS(read_geometry_file(path), validation_error);
    }
}

TEST_CASE("preprocess_to_input: network-shaped two-channel tensor in [0,1]") {
    const Volume ct = synthetic::body_phantom({24, 48, 48});
    bool degenerate = true;
    const Tensor in = preprocess_to_input(ct, &degenerate);

    CHECK(in.dims() == std::vector<int64_t>{2, kNetworkShape[0], kNetworkShape[1],
                                            kNetworkShape[2]});
    CHECK(!degenerate);
    for (int64_t i = 0; i < in.numel(); ++i) {
        CHECK(in.data()[i] >= 0.0f);
        CHECK(in.data()[i] <= 1.0f);
    }

    // The phantom has soft tissue, so the windows are not all air.
    double sum = 0.0;
    for (int64_t i = 0; i < in.numel(); ++i) sum += in.data()[i];
    CHECK(sum > 0.0);
}

TEST_CASE("preprocess_to_input: flags degenerate axes") {
    Geometry g;
    g.shape = {1, 32, 32};
    Volume ct(g, -1000.0f);
    bool degenerate = false;
    const Tensor in = preprocess_to_input(ct, &degenerate);
    CHECK(degenerate);
    CHECK(in.dims()[1] == kNetworkShape[0]);
}

TEST_CASE("run_inference: output carries the scan's exact geometry") {
    const Model m = tiny_network();
    Volume ct = synthetic::body_phantom({20, 40, 40});
    ct.geom.spacing = {3.0, 0.9, 0.9};
    ct.geom.origin = {-31.0, 7.25, -8.5};

    InferenceStages stages;
    const LabelVolume seg = run_inference(m.graph, m.weights, ct, 1, &stages);

    CHECK(seg.geom == ct.geom);  // shape, spacing, origin all preserved
    CHECK(seg.class_count == 5);
    for (uint8_t v : seg.data) CHECK(v <= 4);

    CHECK(stages.preprocess_seconds > 0.0);
    CHECK(stages.network_seconds > 0.0);
    CHECK(stages.postprocess_seconds > 0.0);
    CHECK(stages.total_seconds() >= stages.network_seconds);
    CHECK(!stages.degenerate_axis);
}

TEST_CASE("run_inference: tiny network segments body vs air on the phantom") {
    const Model m = tiny_network();
    const Volume ct = synthetic::body_phantom({24, 48, 48});
    const LabelVolume seg = run_inference(m.graph, m.weights, ct, 2);

    // The weights map windowed-nonzero voxels (soft tissue) to internal
    // class 2 -> export class 1, and air to export class 0.
    std::set<uint8_t> values(seg.data.begin(), seg.data.end());
    CHECK(values.count(0) == 1);
    CHECK(values.count(1) == 1);

    // Center of the phantom is tissue, corners are air.
    const auto& sh = seg.geom.shape;
    CHECK(seg.at(sh[0] / 2, sh[1] / 2, sh[2] / 2) == 1);
    CHECK(seg.at(0, 0, 0) == 0);
}

TEST_CASE("run_inference: rejects a network whose input is not the scan grid") {
    Model m = tiny_network();
    m.graph.inputs[0].dims = {2, 48, 96, 96};
    const Volume ct = synthetic::body_phantom({16, 32, 32});
    CHECK_THROWS_AS(run_inference(m.graph, m.weights, ct, 1), validation_error);
}
