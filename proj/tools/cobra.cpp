// cobra: command-line front end for the segmentation pipeline.
//
// Exit codes: 0 success, 1 validation/usage error, 2 I/O error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cobra/engine.hpp"
#include "cobra/metrics.hpp"
#include "cobra/model.hpp"
#include "cobra/nifti_io.hpp"
#include "cobra/pipeline.hpp"
#include "cobra/postprocess.hpp"
#include "cobra/preprocess.hpp"
#include "cobra/resample.hpp"
#include "cobra/serialize.hpp"

namespace {

using nlohmann::json;

int default_threads() {
    if (const char* env = std::getenv("COBRA_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

std::array<int64_t, 3> parse_shape(const std::string& s) {
    std::array<int64_t, 3> out{};
    std::stringstream ss(s);
    std::string item;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, item, 'x') || item.empty())
            throw cobra::validation_error("expected a DxHxW shape, got '" + s + "'");
        out[i] = std::stoll(item);
        if (out[i] < 1) throw cobra::validation_error("shape components must be >= 1");
    }
    if (std::getline(ss, item, 'x'))
        throw cobra::validation_error("expected a DxHxW shape, got '" + s + "'");
    return out;
}

cobra::Model load_model(const std::string& path) {
    auto [g, w] = cobra::deserialize(path);
    return {std::move(g), std::move(w)};
}

// A body-like synthetic CT: an air background with a soft-tissue ellipsoid
// and a few denser blobs, good enough to exercise the full pipeline.
cobra::Volume make_phantom(const std::array<int64_t, 3>& shape) {
    cobra::Geometry geom;
    geom.shape = shape;
    geom.spacing = {2.5, 0.8, 0.8};
    cobra::Volume v(geom, -1000.0f);
    const double cz = (shape[0] - 1) / 2.0, cy = (shape[1] - 1) / 2.0,
                 cx = (shape[2] - 1) / 2.0;
    const double rz = shape[0] * 0.38, ry = shape[1] * 0.34, rx = shape[2] * 0.30;
    for (int64_t z = 0; z < shape[0]; ++z)
        for (int64_t y = 0; y < shape[1]; ++y)
            for (int64_t x = 0; x < shape[2]; ++x) {
                const double dz = (z - cz) / rz, dy = (y - cy) / ry, dx = (x - cx) / rx;
                const double r2 = dz * dz + dy * dy + dx * dx;
                if (r2 <= 1.0) {
                    float hu = 40.0f;
                    if (r2 < 0.1) hu = 90.0f;          // a denser core
                    else if (r2 > 0.8) hu = -60.0f;    // fatty rim
                    v.at(z, y, x) = hu;
                }
            }
    return v;
}

int cmd_preprocess(const std::string& in_path, const std::string& labels_path,
                   const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const cobra::Volume ct = cobra::read_volume(in_path);
    bool degenerate = false;
    const cobra::Tensor input = cobra::preprocess_to_input(ct, &degenerate);
    if (degenerate)
        std::cerr << "warning: an axis of extent 1 cannot support cubic interpolation\n";

    cobra::WeightStore out;
    out.add("input", input);

    if (!labels_path.empty()) {
        cobra::LabelVolume gt = cobra::read_labels(labels_path, cobra::kOutputClassCount);
        if (gt.geom.shape != ct.geom.shape)
            throw cobra::validation_error("labels shape does not match the CT");
        // Mask from the raw CT, then both mask and labels to the network grid.
        cobra::LabelVolume mask = cobra::compute_body_mask(ct);
        mask = cobra::resample_labels_nearest(mask, cobra::kNetworkShape);
        gt = cobra::resample_labels_nearest(gt, cobra::kNetworkShape);
        const cobra::LabelVolume targets = cobra::split_background(gt, mask);

        cobra::Tensor t({targets.geom.shape[0], targets.geom.shape[1],
                         targets.geom.shape[2]});
        for (size_t i = 0; i < targets.data.size(); ++i)
            t.data()[i] = static_cast<float>(targets.data[i]);
        out.add("targets", t);
    }

    cobra::write_weight_store(out, (fs::path(out_dir) / "tensors.cbw").string());
    cobra::write_geometry_file((fs::path(out_dir) / "geometry.txt").string(), ct.geom);
    std::cout << "wrote " << (fs::path(out_dir) / "tensors.cbw").string() << " ("
              << out.size() << " tensors) and geometry.txt\n";
    return 0;
}

int cmd_build_model(const std::string& config_path, const std::string& out_path,
                    bool random_weights, bool have_seed, uint64_t seed, bool factorize) {
    cobra::ArchConfig cfg = config_path.empty() ? cobra::ArchConfig::reference()
                                                : cobra::ArchConfig::load(config_path);
    if (random_weights && !have_seed)
        throw cobra::validation_error("--random-weights requires an explicit --seed");
    const cobra::Model m = cobra::build_cobra(
        cfg, factorize,
        random_weights ? cobra::WeightInit::he_normal : cobra::WeightInit::zeros, seed);
    cobra::serialize(m.graph, m.weights, out_path);
    std::cout << "wrote " << out_path << ": " << cobra::count_params(m.graph, m.weights)
              << " parameters, " << m.graph.nodes.size() << " nodes\n";
    return 0;
}

int cmd_optimize(const std::string& in_path, const std::string& out_path,
                 const std::vector<std::string>& passes) {
    cobra::Model m = load_model(in_path);
    const size_t before = m.graph.nodes.size();
    m = cobra::optimize(std::move(m), passes);
    cobra::serialize(m.graph, m.weights, out_path);
    std::cout << "wrote " << out_path << ": " << before << " -> " << m.graph.nodes.size()
              << " nodes\n";
    return 0;
}

int cmd_infer(const std::string& model_path, const std::string& in_path,
              const std::string& out_path, int threads) {
    const cobra::Model m = load_model(model_path);
    const cobra::Volume ct = cobra::read_volume(in_path);
    cobra::InferenceStages stages;
    const cobra::LabelVolume seg = cobra::run_inference(m.graph, m.weights, ct, threads,
                                                        &stages);
    cobra::write_labels(seg, out_path);
    std::cout << "wrote " << out_path << "\n"
              << "preprocess:  " << stages.preprocess_seconds << " s\n"
              << "network:     " << stages.network_seconds << " s\n"
              << "postprocess: " << stages.postprocess_seconds << " s\n"
              << "total:       " << stages.total_seconds() << " s\n";
    return 0;
}

int cmd_bench(const std::string& model_path, int runs, int threads,
              const std::string& report_path, const std::string& in_path,
              const std::string& phantom_shape) {
    if (runs < 2) throw cobra::validation_error("bench: need --runs >= 2 (first is warmup)");
    const cobra::Model m = load_model(model_path);

    const cobra::Volume ct =
        in_path.empty() ? make_phantom(parse_shape(phantom_shape)) : cobra::read_volume(in_path);

    std::vector<cobra::InferenceStages> stages(static_cast<size_t>(runs));
    for (int r = 0; r < runs; ++r)
        cobra::run_inference(m.graph, m.weights, ct, threads, &stages[r]);

    // Warmup run discarded from both medians.
    auto median_of = [&](auto get) {
        std::vector<double> xs;
        for (int r = 1; r < runs; ++r) xs.push_back(get(stages[r]));
        std::sort(xs.begin(), xs.end());
        const size_t n = xs.size();
        return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
    };
    const double net_median = median_of([](const auto& s) { return s.network_seconds; });
    const double e2e_median = median_of([](const auto& s) { return s.total_seconds(); });

    // Per-node breakdown and plan statistics from the engine's own harness.
    const cobra::Tensor input = cobra::preprocess_to_input(ct);
    const cobra::RunReport rr =
        cobra::benchmark_model(m.graph, m.weights, input, runs, threads);

    json j;
    j["model"] = model_path;
    j["threads"] = threads;
    j["runs"] = runs;
    j["timed_samples"] = runs - 1;
    j["input_shape"] = {ct.geom.shape[0], ct.geom.shape[1], ct.geom.shape[2]};
    j["network_median_seconds"] = net_median;
    j["end_to_end_median_seconds"] = e2e_median;
    j["engine_median_seconds"] = rr.median_seconds;
    j["peak_planned_bytes"] = rr.peak_bytes;
    j["logical_cores"] = std::thread::hardware_concurrency();
    j["gpu_memory_bytes"] = 0;  // no GPU code path exists
    json per_run = json::array();
    for (int r = 0; r < runs; ++r)
        per_run.push_back({{"preprocess_seconds", stages[r].preprocess_seconds},
                           {"network_seconds", stages[r].network_seconds},
                           {"postprocess_seconds", stages[r].postprocess_seconds}});
    j["stage_seconds"] = per_run;
    json nodes = json::array();
    for (const auto& nt : rr.node_seconds)
        nodes.push_back({{"id", nt.id},
                         {"op", cobra::op_kind_name(nt.kind)},
                         {"seconds", nt.seconds}});
    j["node_seconds"] = nodes;

    std::cout << "network median:    " << net_median << " s\n"
              << "end-to-end median: " << e2e_median << " s\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw cobra::io_error("cannot open " + report_path + " for writing");
        out << j.dump(2) << "\n";
        std::cout << "wrote " << report_path << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gold_path,
                 const std::string& classes_csv, double nsd_tol,
                 const std::string& report_path) {
    std::vector<int> classes;
    {
        std::stringstream ss(classes_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) classes.push_back(std::stoi(item));
    }
    if (classes.empty()) throw cobra::validation_error("evaluate: empty --classes list");
    int k_max = 0;
    for (int c : classes) {
        if (c < 0) throw cobra::validation_error("evaluate: negative class id");
        k_max = std::max(k_max, c);
    }

    const cobra::LabelVolume pred = cobra::read_labels(pred_path, k_max + 1);
    const cobra::LabelVolume gold = cobra::read_labels(gold_path, k_max + 1);

    json rows = json::array();
    std::cout << "class        dsc        nsd@" << nsd_tol << "mm\n";
    for (int c : classes) {
        const double d = cobra::dsc(pred, gold, c);
        const double n = cobra::nsd(pred, gold, c, nsd_tol);
        std::cout << c << "        " << d << "   " << n << "\n";
        rows.push_back({{"class", c}, {"dsc", d}, {"nsd", n}});
    }
    if (!report_path.empty()) {
        json j;
        j["pred"] = pred_path;
        j["gold"] = gold_path;
        j["nsd_tolerance_mm"] = nsd_tol;
        j["per_class"] = rows;
        std::ofstream out(report_path);
        if (!out) throw cobra::io_error("cannot open " + report_path + " for writing");
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_analyze(const std::string& model_path, const std::string& input_shape) {
    cobra::Model m = load_model(model_path);
    if (!input_shape.empty()) {
        if (m.graph.inputs.size() != 1 || m.graph.inputs[0].dims.size() != 4)
            throw cobra::validation_error("analyze: --input-shape needs a single 4D input");
        const auto s = parse_shape(input_shape);
        m.graph.inputs[0].dims = {m.graph.inputs[0].dims[0], s[0], s[1], s[2]};
    }
    const int64_t params = cobra::count_params(m.graph, m.weights);
    const int64_t flops = cobra::count_flops(m.graph, m.weights);
    const size_t bytes = cobra::serialize_bytes(m.graph, m.weights).size();
    std::cout << "parameters: " << params << "\n"
              << "flops: " << flops << " (" << flops / 1e9 << " GFLOP at 2 FLOPs/MAC)\n"
              << "serialized bytes: " << bytes << " (" << bytes / 1e6 << " Mb)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CPU inference stack for 3D abdominal organ segmentation"};
    app.require_subcommand(1);

    // preprocess
    std::string pre_in, pre_labels, pre_out_dir;
    auto* pre = app.add_subcommand("preprocess",
                                   "Resample a CT to the network grid and window it");
    pre->add_option("--in", pre_in, "input CT (.nii / .nii.gz)")->required();
    pre->add_option("--labels", pre_labels, "gold labels to convert to training targets");
    pre->add_option("--out-dir", pre_out_dir, "output directory")->required();

    // build-model
    std::string bm_config, bm_out;
    bool bm_random = false, bm_no_factorize = false;
    uint64_t bm_seed = 0;
    auto* bm = app.add_subcommand("build-model", "Construct the network graph");
    bm->add_option("--config", bm_config, "architecture config (key = value file)");
    bm->add_option("--out", bm_out, "output model path (.cbr)")->required();
    bm->add_flag("--random-weights", bm_random, "He-normal weights (needs --seed)");
    auto* seed_opt = bm->add_option("--seed", bm_seed, "RNG seed for --random-weights");
    bm->add_flag("--no-factorize", bm_no_factorize, "keep cubic kernels");

    // optimize
    std::string opt_in, opt_out;
    std::vector<std::string> opt_passes{"fold", "eliminate", "fuse"};
    auto* opt = app.add_subcommand("optimize", "Run graph rewrites on a model");
    opt->add_option("--model", opt_in, "input model (.cbr)")->required();
    opt->add_option("--out", opt_out, "output model (.cbr)")->required();
    opt->add_option("--passes", opt_passes, "subset of: fold eliminate fuse")
        ->delimiter(',');

    // infer
    std::string inf_model, inf_in, inf_out;
    int inf_threads = default_threads();
    auto* inf = app.add_subcommand("infer", "Segment one CT scan");
    inf->add_option("--model", inf_model, "model (.cbr)")->required();
    inf->add_option("--in", inf_in, "input CT (.nii / .nii.gz)")->required();
    inf->add_option("--out", inf_out, "output segmentation (.nii / .nii.gz)")->required();
    inf->add_option("--threads", inf_threads, "worker threads (default $COBRA_THREADS or 1)");

    // bench
    std::string b_model, b_report, b_in, b_phantom = "147x512x512";
    int b_runs = 5, b_threads = default_threads();
    auto* ben = app.add_subcommand("bench", "Benchmark inference");
    ben->add_option("--model", b_model, "model (.cbr)")->required();
    ben->add_option("--runs", b_runs, "total runs; first is warmup (default 5)");
    ben->add_option("--threads", b_threads, "worker threads (default $COBRA_THREADS or 1)");
    ben->add_option("--report", b_report, "write a JSON report here");
    ben->add_option("--in", b_in, "CT to benchmark on (default: synthetic phantom)");
    ben->add_option("--phantom-shape", b_phantom, "synthetic CT shape DxHxW");

    // evaluate
    std::string ev_pred, ev_gold, ev_classes = "1,2,3,4", ev_report;
    double ev_tol = 1.0;
    auto* ev = app.add_subcommand("evaluate", "Score a segmentation against gold labels");
    ev->add_option("--pred", ev_pred, "predicted labels (.nii / .nii.gz)")->required();
    ev->add_option("--gold", ev_gold, "reference labels (.nii / .nii.gz)")->required();
    ev->add_option("--classes", ev_classes, "comma-separated class ids (default 1,2,3,4)");
    ev->add_option("--nsd-tol", ev_tol, "NSD tolerance in mm (default 1.0)");
    ev->add_option("--report", ev_report, "write a JSON report here");

    // analyze
    std::string an_model, an_shape;
    auto* an = app.add_subcommand("analyze", "Print parameter/FLOP/size counts");
    an->add_option("--model", an_model, "model (.cbr)")->required();
    an->add_option("--input-shape", an_shape, "override input shape, e.g. 96x192x192");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the error and usage pointer
        return 1;
    }

    try {
        if (app.got_subcommand(pre)) return cmd_preprocess(pre_in, pre_labels, pre_out_dir);
        if (app.got_subcommand(bm))
            return cmd_build_model(bm_config, bm_out, bm_random, seed_opt->count() > 0,
                                   bm_seed, !bm_no_factorize);
        if (app.got_subcommand(opt)) return cmd_optimize(opt_in, opt_out, opt_passes);
        if (app.got_subcommand(inf)) return cmd_infer(inf_model, inf_in, inf_out, inf_threads);
        if (app.got_subcommand(ben))
            return cmd_bench(b_model, b_runs, b_threads, b_report, b_in, b_phantom);
        if (app.got_subcommand(ev))
            return cmd_evaluate(ev_pred, ev_gold, ev_classes, ev_tol, ev_report);
        if (app.got_subcommand(an)) return cmd_analyze(an_model, an_shape);
    } catch (const cobra::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cobra::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
