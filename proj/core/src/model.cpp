#include "cobra/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cobra/rng.hpp"

namespace cobra {

void ArchConfig::validate() const {
    if (input_channels < 1 || class_count < 2)
        throw validation_error("arch config: need input_channels >= 1, class_count >= 2");
    if (levels < 1 || static_cast<int64_t>(widths.size()) != levels)
        throw validation_error("arch config: widths length must equal levels");
    if (bottleneck_factor_default < 1 || bottleneck_factor_wide < 1)
        throw validation_error("arch config: bottleneck factors must be >= 1");
    for (int64_t w : widths) {
        if (w < 1) throw validation_error("arch config: widths must be >= 1");
        if (w % factor_for(w) != 0)
            throw validation_error("arch config: width " + std::to_string(w) +
                                   " not divisible by its bottleneck factor");
    }
    // The stem halves each extent, then levels 1.. halve again.
    for (int64_t e : input_shape) {
        if (e < 1) throw validation_error("arch config: input shape components must be >= 1");
        if (e % (int64_t{1} << levels) != 0)
            throw validation_error("arch config: input shape must be divisible by 2^levels");
    }
}

int64_t ArchConfig::factor_for(int64_t width) const {
    const int64_t wmax = *std::max_element(widths.begin(), widths.end());
    return width == wmax ? bottleneck_factor_wide : bottleneck_factor_default;
}

namespace {

std::vector<int64_t> parse_int_list(const std::string& s) {
    std::vector<int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoll(item));
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

ArchConfig ArchConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    ArchConfig cfg;
    cfg.widths.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw validation_error(path + ":" + std::to_string(lineno) +
                                   ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "input_channels") cfg.input_channels = std::stoll(val);
            else if (key == "class_count") cfg.class_count = std::stoll(val);
            else if (key == "levels") cfg.levels = std::stoll(val);
            else if (key == "widths") cfg.widths = parse_int_list(val);
            else if (key == "bottleneck_factor_default") cfg.bottleneck_factor_default = std::stoll(val);
            else if (key == "bottleneck_factor_wide") cfg.bottleneck_factor_wide = std::stoll(val);
            else if (key == "input_shape") {
                const auto v = parse_int_list(val);
                if (v.size() != 3)
                    throw validation_error("input_shape needs 3 components");
                cfg.input_shape = {v[0], v[1], v[2]};
            } else {
                throw validation_error(path + ":" + std::to_string(lineno) +
                                       ": unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw validation_error(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

void ArchConfig::save(const std::string& path) const {
    validate();
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << "input_channels = " << input_channels << "\n";
    out << "class_count = " << class_count << "\n";
    out << "levels = " << levels << "\n";
    out << "widths = ";
    for (size_t i = 0; i < widths.size(); ++i) out << (i ? "," : "") << widths[i];
    out << "\n";
    out << "bottleneck_factor_default = " << bottleneck_factor_default << "\n";
    out << "bottleneck_factor_wide = " << bottleneck_factor_wide << "\n";
    out << "input_shape = " << input_shape[0] << "," << input_shape[1] << ","
        << input_shape[2] << "\n";
    if (!out) throw io_error("write failure on " + path);
}

namespace {

// Incrementally assembles nodes in topological order with named weights.
class GraphBuilder {
public:
    Graph g;
    WeightStore w;

    TensorRef input(const std::string& name, std::vector<int64_t> dims) {
        g.inputs.push_back({name, std::move(dims)});
        return graph_input_ref(static_cast<int64_t>(g.inputs.size()) - 1);
    }

    TensorRef conv(TensorRef in, ConvSpec spec, const std::string& prefix) {
        return conv_like(OpKind::conv, in, spec, prefix);
    }

    TensorRef conv_transpose(TensorRef in, ConvSpec spec, const std::string& prefix) {
        return conv_like(OpKind::conv_transpose, in, spec, prefix);
    }

    TensorRef relu(TensorRef in) { return emit(OpKind::relu, {in}); }
    TensorRef add(TensorRef a, TensorRef b) { return emit(OpKind::add, {a, b}); }
    TensorRef concat(TensorRef a, TensorRef b) { return emit(OpKind::concat, {a, b}); }

    void output(const std::string& name, TensorRef ref) { g.outputs.push_back({name, ref}); }

private:
    int64_t next_id_ = 0;

    TensorRef emit(OpKind kind, std::vector<TensorRef> inputs) {
        Node n;
        n.id = next_id_++;
        n.kind = kind;
        n.inputs = std::move(inputs);
        g.nodes.push_back(std::move(n));
        return g.nodes.back().id;
    }

    TensorRef conv_like(OpKind kind, TensorRef in, const ConvSpec& spec,
                        const std::string& prefix) {
        spec.validate();
        Node n;
        n.id = next_id_++;
        n.kind = kind;
        n.inputs = {in};
        n.conv = spec;
        n.weight = prefix + ".w";
        n.bias = spec.bias ? prefix + ".b" : "";
        const auto& k = spec.kernel;
        if (kind == OpKind::conv)
            w.add(n.weight, Tensor({spec.out_channels, spec.in_channels, k[0], k[1], k[2]}));
        else
            w.add(n.weight, Tensor({spec.in_channels, spec.out_channels, k[0], k[1], k[2]}));
        if (spec.bias) w.add(n.bias, Tensor({spec.out_channels}));
        g.nodes.push_back(std::move(n));
        return g.nodes.back().id;
    }
};

ConvSpec pointwise(int64_t cin, int64_t cout, int64_t stride = 1) {
    ConvSpec s;
    s.kernel = {1, 1, 1};
    s.stride = {stride, stride, stride};
    s.pad = {0, 0, 0};
    s.in_channels = cin;
    s.out_channels = cout;
    return s;
}

ConvSpec cubic(int64_t cin, int64_t cout, int64_t k, int64_t stride) {
    ConvSpec s;
    s.kernel = {k, k, k};
    s.stride = {stride, stride, stride};
    s.pad = {k / 2, k / 2, k / 2};
    s.in_channels = cin;
    s.out_channels = cout;
    return s;
}

// Residual bottleneck block: reduce -> factorized double conv -> restore,
// with a projected shortcut when channels or resolution change.
TensorRef bottleneck_block(GraphBuilder& b, TensorRef in, int64_t in_ch, int64_t out_ch,
                           int64_t factor, bool downsample, const std::string& prefix) {
    const int64_t c = out_ch / factor;
    const int64_t s = downsample ? 2 : 1;

    TensorRef t = b.conv(in, pointwise(in_ch, c), prefix + ".reduce");
    t = b.relu(t);
    t = b.conv(t, cubic(c, c, 3, s), prefix + ".f1");
    t = b.relu(t);
    t = b.conv(t, cubic(c, c, 3, 1), prefix + ".f2");
    t = b.relu(t);
    t = b.conv(t, pointwise(c, out_ch), prefix + ".restore");

    TensorRef shortcut = in;
    if (in_ch != out_ch || downsample)
        shortcut = b.conv(in, pointwise(in_ch, out_ch, s), prefix + ".proj");
    t = b.add(t, shortcut);
    return b.relu(t);
}

// Bottlenecked upsampling: reduce -> 2x2x2 stride-2 transpose conv ->
// restore, each followed by relu.
TensorRef up_block(GraphBuilder& b, TensorRef in, int64_t in_ch, int64_t out_ch,
                   int64_t factor, const std::string& prefix) {
    const int64_t c = in_ch / factor;
    TensorRef t = b.conv(in, pointwise(in_ch, c), prefix + ".reduce");
    t = b.relu(t);
    ConvSpec up;
    up.kernel = {2, 2, 2};
    up.stride = {2, 2, 2};
    up.in_channels = c;
    up.out_channels = c;
    t = b.conv_transpose(t, up, prefix + ".up");
    t = b.relu(t);
    t = b.conv(t, pointwise(c, out_ch), prefix + ".restore");
    return b.relu(t);
}

void init_weights(Graph& g, WeightStore& w, WeightInit init, uint64_t seed) {
    if (init == WeightInit::zeros) return;  // builder tensors start zeroed
    uint64_t tensor_index = 0;
    for (const auto& n : g.nodes) {
        if (n.kind != OpKind::conv && n.kind != OpKind::conv_transpose) continue;
        const uint64_t tensor_seed = rng::word(seed, tensor_index++);
        const Tensor& old = w.get(n.weight);
        const auto dims = old.dims();
        // fan_in = Cin * kernel volume for both layouts.
        const double fan_in = static_cast<double>(n.conv.in_channels) *
                              n.conv.kernel[0] * n.conv.kernel[1] * n.conv.kernel[2];
        const double stddev = std::sqrt(2.0 / fan_in);
        Tensor fresh(dims);
        float* p = fresh.data();
        for (int64_t i = 0; i < fresh.numel(); ++i)
            p[i] = static_cast<float>(stddev *
                                      rng::normal(tensor_seed, static_cast<uint64_t>(i)));
        w.erase(n.weight);
        w.add(n.weight, std::move(fresh));
        // biases stay zero
    }
}

}  // namespace

void factorize_conv(Graph& g, WeightStore& w, int64_t node_id) {
    const auto idx = g.build_index();
    auto it = idx.find(node_id);
    if (it == idx.end())
        throw validation_error("factorize: no node with id " + std::to_string(node_id));
    const size_t pos = it->second;
    const Node n = g.nodes[pos];

    if (n.kind != OpKind::conv)
        throw validation_error("factorize: node is not a convolution");
    const auto [kz, ky, kx] = n.conv.kernel;
    if (kz != ky || ky != kx)
        throw validation_error("factorize: kernel is not cubic");
    if (kz == 1) throw validation_error("factorize: 1x1x1 kernel, nothing to factorize");
    if (kz % 2 == 0) throw validation_error("factorize: kernel size must be odd");

    int64_t next_id = 0;
    for (const auto& node : g.nodes) next_id = std::max(next_id, node.id + 1);

    std::string base = n.weight;
    if (base.size() > 2 && base.compare(base.size() - 2, 2, ".w") == 0)
        base.resize(base.size() - 2);

    const int64_t k = kz;
    const auto make = [&](int axis, int64_t cin, int64_t cout, TensorRef in,
                          int64_t id, const char* tag) {
        Node c;
        c.id = id;
        c.kind = OpKind::conv;
        c.inputs = {in};
        c.conv.kernel = {1, 1, 1};
        c.conv.stride = {1, 1, 1};
        c.conv.pad = {0, 0, 0};
        c.conv.kernel[axis] = k;
        c.conv.stride[axis] = n.conv.stride[axis];
        c.conv.pad[axis] = n.conv.pad[axis];
        c.conv.in_channels = cin;
        c.conv.out_channels = cout;
        c.conv.bias = true;
        c.weight = base + "." + tag + ".w";
        c.bias = base + "." + tag + ".b";
        w.add(c.weight, Tensor({cout, cin, c.conv.kernel[0], c.conv.kernel[1],
                                c.conv.kernel[2]}));
        w.add(c.bias, Tensor({cout}));
        return c;
    };

    const int64_t cin = n.conv.in_channels, cout = n.conv.out_channels;
    Node nz = make(0, cin, cout, n.inputs[0], next_id, "z");
    Node ny = make(1, cout, cout, nz.id, next_id + 1, "y");
    Node nx = make(2, cout, cout, ny.id, n.id, "x");  // keeps downstream refs
    nx.fused_relu = n.fused_relu;

    w.erase(n.weight);
    if (!n.bias.empty()) w.erase(n.bias);

    g.nodes[pos] = std::move(nz);
    g.nodes.insert(g.nodes.begin() + static_cast<int64_t>(pos) + 1, std::move(ny));
    g.nodes.insert(g.nodes.begin() + static_cast<int64_t>(pos) + 2, std::move(nx));
}

Model build_cobra(const ArchConfig& cfg, bool factorize, WeightInit init, uint64_t seed) {
    cfg.validate();
    GraphBuilder b;

    const TensorRef x = b.input(
        "input", {cfg.input_channels, cfg.input_shape[0], cfg.input_shape[1],
                  cfg.input_shape[2]});

    TensorRef cur = b.conv(x, cubic(cfg.input_channels, cfg.widths[0], 7, 2), "stem");
    cur = b.relu(cur);

    std::vector<TensorRef> skips;
    int64_t ch = cfg.widths[0];
    for (int64_t i = 0; i < cfg.levels; ++i) {
        const int64_t width = cfg.widths[i];
        cur = bottleneck_block(b, cur, ch, width, cfg.factor_for(width), i > 0,
                               "enc" + std::to_string(i));
        ch = width;
        skips.push_back(cur);
    }

    for (int64_t i = cfg.levels - 2; i >= 0; --i) {
        const int64_t upper = cfg.widths[i + 1];
        const int64_t width = cfg.widths[i];
        cur = up_block(b, cur, upper, width, cfg.factor_for(upper),
                       "up" + std::to_string(i));
        cur = b.concat(skips[i], cur);
        cur = bottleneck_block(b, cur, 2 * width, width, cfg.factor_for(width), false,
                               "dec" + std::to_string(i));
    }

    cur = b.conv(cur, pointwise(cfg.widths[0], cfg.class_count), "head");
    ConvSpec final_up;
    final_up.kernel = {2, 2, 2};
    final_up.stride = {2, 2, 2};
    final_up.in_channels = cfg.class_count;
    final_up.out_channels = cfg.class_count;
    cur = b.conv_transpose(cur, final_up, "final_up");
    b.output("logits", cur);

    Model m{std::move(b.g), std::move(b.w)};

    if (factorize) {
        // Factorize every cubic conv with k >= 3 (the stem's 7 and the
        // blocks' 3s); 1x1x1 and the 2x2x2 transpose convs stay.
        std::vector<int64_t> targets;
        for (const auto& n : m.graph.nodes) {
            const auto& k = n.conv.kernel;
            if (n.kind == OpKind::conv && k[0] == k[1] && k[1] == k[2] && k[0] >= 3)
                targets.push_back(n.id);
        }
        for (int64_t id : targets) factorize_conv(m.graph, m.weights, id);
    }

    init_weights(m.graph, m.weights, init, seed);
    m.graph.validate(m.weights);
    return m;
}

int64_t count_params(const Graph& g, const WeightStore& w) {
    std::unordered_set<std::string> seen;
    int64_t total = 0;
    for (const auto& n : g.nodes) {
        for (const std::string* name : {&n.weight, &n.bias}) {
            if (name->empty() || !seen.insert(*name).second) continue;
            total += w.get(*name).numel();
        }
    }
    return total;
}

int64_t count_flops(const Graph& g, const WeightStore& w) {
    const auto dims = g.infer_shapes(w);
    const auto node_of = g.build_index();
    auto dims_of = [&](TensorRef r) -> const std::vector<int64_t>& {
        if (is_graph_input(r)) return g.inputs[graph_input_index(r)].dims;
        return dims.at(r);
    };

    int64_t total = 0;
    for (const auto& n : g.nodes) {
        const auto& out = dims.at(n.id);
        int64_t out_elems = 1;
        for (int64_t e : out) out_elems *= e;
        switch (n.kind) {
            case OpKind::conv: {
                const int64_t spatial = out[1] * out[2] * out[3];
                const int64_t kvol =
                    n.conv.kernel[0] * n.conv.kernel[1] * n.conv.kernel[2];
                total += 2 * kvol * n.conv.in_channels * n.conv.out_channels * spatial;
                if (n.conv.bias) total += out_elems;
                if (n.fused_relu) total += out_elems;
                break;
            }
            case OpKind::conv_transpose: {
                const auto& in = dims_of(n.inputs[0]);
                const int64_t in_spatial = in[1] * in[2] * in[3];
                const int64_t kvol =
                    n.conv.kernel[0] * n.conv.kernel[1] * n.conv.kernel[2];
                total += 2 * kvol * n.conv.in_channels * n.conv.out_channels * in_spatial;
                if (n.conv.bias) total += out_elems;
                break;
            }
            case OpKind::relu:
            case OpKind::add:
                total += out_elems;
                break;
            case OpKind::concat:
            case OpKind::constant:
            case OpKind::identity:
                break;
        }
    }
    return total;
}

}  // namespace cobra
