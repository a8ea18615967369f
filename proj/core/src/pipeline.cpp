#include "cobra/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "cobra/engine.hpp"
#include "cobra/postprocess.hpp"
#include "cobra/preprocess.hpp"
#include "cobra/resample.hpp"

namespace cobra {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Tensor preprocess_to_input(const Volume& ct, bool* degenerate_axis) {
    ct.validate();
    const Volume net = resample_image(ct, kNetworkShape, 3, degenerate_axis);
    return make_input_channels(net);
}

LabelVolume run_inference(const Graph& g, const WeightStore& w, const Volume& ct,
                          int threads, InferenceStages* stages) {
    if (threads < 1) throw validation_error("inference: thread count must be >= 1");
    InferenceStages st;

    auto t0 = std::chrono::steady_clock::now();
    const Tensor input = preprocess_to_input(ct, &st.degenerate_axis);
    st.preprocess_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const Tensor logits = execute(g, w, input, threads);
    st.network_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const auto& ld = logits.dims();
    if (ld.size() != 4) throw validation_error("inference: network output is not (K,D,H,W)");
    Geometry net_geom;
    net_geom.shape = {ld[1], ld[2], ld[3]};
    for (int a = 0; a < 3; ++a)
        net_geom.spacing[a] = ct.geom.spacing[a] *
                              static_cast<double>(ct.geom.shape[a]) / net_geom.shape[a];
    net_geom.origin = ct.geom.origin;

    LabelVolume seg = argmax_channels(logits, net_geom);
    seg = upsample_nearest(seg, ct.geom.shape);
    seg = remap_labels(seg);
    if (seg.geom.shape != ct.geom.shape)
        throw validation_error("inference: output shape does not match the input scan");
    seg.geom = ct.geom;  // exact original spacing/origin, not the round-tripped values
    st.postprocess_seconds = seconds_since(t0);

    if (stages) *stages = st;
    return seg;
}

void write_geometry_file(const std::string& path, const Geometry& g) {
    g.validate();
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.precision(17);
    out << "shape = " << g.shape[0] << "," << g.shape[1] << "," << g.shape[2] << "\n";
    out << "spacing = " << g.spacing[0] << "," << g.spacing[1] << "," << g.spacing[2] << "\n";
    out << "origin = " << g.origin[0] << "," << g.origin[1] << "," << g.origin[2] << "\n";
    if (!out) throw io_error("write failure on " + path);
}

Geometry read_geometry_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    Geometry g;
    bool got_shape = false, got_spacing = false, got_origin = false;
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string key, eq, rest;
        ss >> key >> eq;
        std::getline(ss, rest);
        if (key.empty()) continue;
        if (eq != "=") throw validation_error(path + ": expected key = value lines");
        std::array<double, 3> vals{};
        std::stringstream vs(rest);
        std::string item;
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(vs, item, ','))
                throw validation_error(path + ": expected three comma-separated values for " + key);
            vals[i] = std::stod(item);
        }
        if (key == "shape") {
            for (int a = 0; a < 3; ++a) g.shape[a] = static_cast<int64_t>(vals[a]);
            got_shape = true;
        } else if (key == "spacing") {
            g.spacing = vals;
            got_spacing = true;
        } else if (key == "origin") {
            g.origin = vals;
            got_origin = true;
        } else {
            throw validation_error(path + ": unknown key '" + key + "'");
        }
    }
    if (!got_shape || !got_spacing || !got_origin)
        throw validation_error(path + ": missing shape, spacing or origin");
    g.validate();
    return g;
}

}  // namespace cobra
