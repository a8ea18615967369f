#include "cobra/passes.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "cobra/engine.hpp"
#include "cobra/serialize.hpp"

namespace cobra {

namespace {

std::string unique_name(const WeightStore& w, const std::string& base) {
    if (!w.contains(base)) return base;
    for (int i = 2;; ++i) {
        const std::string cand = base + "." + std::to_string(i);
        if (!w.contains(cand)) return cand;
    }
}

// node id -> number of places (node inputs + graph outputs) consuming it.
std::unordered_map<int64_t, int> consumer_counts(const Graph& g) {
    std::unordered_map<int64_t, int> c;
    for (const auto& n : g.nodes)
        for (TensorRef r : n.inputs)
            if (!is_graph_input(r)) ++c[r];
    for (const auto& out : g.outputs)
        if (!is_graph_input(out.ref)) ++c[out.ref];
    return c;
}

}  // namespace

Model fold_constants(Model m) {
    m.graph.validate(m.weights);
    std::unordered_set<int64_t> constant_ids;
    for (const auto& n : m.graph.nodes)
        if (n.kind == OpKind::constant) constant_ids.insert(n.id);

    auto node_of = m.graph.build_index();
    for (auto& n : m.graph.nodes) {
        if (n.kind == OpKind::constant || n.inputs.empty()) continue;
        const bool all_const = std::all_of(
            n.inputs.begin(), n.inputs.end(),
            [&](TensorRef r) { return !is_graph_input(r) && constant_ids.count(r); });
        if (!all_const) continue;

        std::vector<const Tensor*> ins;
        ins.reserve(n.inputs.size());
        for (TensorRef r : n.inputs)
            ins.push_back(&m.weights.get(m.graph.nodes[node_of.at(r)].weight));
        Tensor value = eval_node_reference(n, ins, m.weights);

        const std::string name =
            unique_name(m.weights, "const." + std::to_string(n.id));
        m.weights.add(name, std::move(value));
        n = Node{n.id, OpKind::constant, {}, ConvSpec{}, false, name, ""};
        constant_ids.insert(n.id);
    }
    return m;
}

Model eliminate_redundant(Model m) {
    m.graph.validate(m.weights);
    const auto node_of = m.graph.build_index();

    // Resolve references through identity chains.
    std::unordered_map<int64_t, TensorRef> skip;
    for (const auto& n : m.graph.nodes)
        if (n.kind == OpKind::identity) {
            TensorRef r = n.inputs[0];
            while (!is_graph_input(r) && skip.count(r)) r = skip.at(r);
            skip.emplace(n.id, r);
        }
    auto resolve = [&](TensorRef r) {
        if (!is_graph_input(r)) {
            auto it = skip.find(r);
            if (it != skip.end()) return it->second;
        }
        return r;
    };
    for (auto& n : m.graph.nodes)
        for (auto& r : n.inputs) r = resolve(r);
    for (auto& out : m.graph.outputs) out.ref = resolve(out.ref);

    // Keep only nodes reachable from an output.
    std::unordered_set<int64_t> live;
    std::vector<int64_t> stack;
    auto mark = [&](TensorRef r) {
        if (!is_graph_input(r) && live.insert(r).second) stack.push_back(r);
    };
    for (const auto& out : m.graph.outputs) mark(out.ref);
    while (!stack.empty()) {
        const int64_t id = stack.back();
        stack.pop_back();
        for (TensorRef r : m.graph.nodes[node_of.at(id)].inputs) mark(r);
    }

    std::vector<Node> kept;
    kept.reserve(m.graph.nodes.size());
    for (auto& n : m.graph.nodes)
        if (n.kind != OpKind::identity && live.count(n.id)) kept.push_back(std::move(n));
    m.graph.nodes = std::move(kept);

    // Sweep weights nothing references any more.
    std::unordered_set<std::string> referenced;
    for (const auto& n : m.graph.nodes) {
        if (!n.weight.empty()) referenced.insert(n.weight);
        if (!n.bias.empty()) referenced.insert(n.bias);
    }
    std::vector<std::string> orphans;
    for (const auto& [name, t] : m.weights.entries())
        if (!referenced.count(name)) orphans.push_back(name);
    for (const auto& name : orphans) m.weights.erase(name);

    return m;
}

namespace {

// Applies the first matching fusion, returns false when none matches.
bool fuse_one(Model& m) {
    const auto node_of = m.graph.build_index();
    const auto consumers = consumer_counts(m.graph);

    for (size_t i = 0; i < m.graph.nodes.size(); ++i) {
        const Node& n = m.graph.nodes[i];

        // conv + per-channel constant add -> biased conv.
        if (n.kind == OpKind::add) {
            for (int flip = 0; flip < 2; ++flip) {
                const TensorRef a = n.inputs[flip];
                const TensorRef b = n.inputs[1 - flip];
                if (is_graph_input(a) || is_graph_input(b)) continue;
                const Node& conv = m.graph.nodes[node_of.at(a)];
                const Node& cst = m.graph.nodes[node_of.at(b)];
                if (conv.kind != OpKind::conv && conv.kind != OpKind::conv_transpose)
                    continue;
                if (conv.conv.bias || conv.fused_relu) continue;
                if (cst.kind != OpKind::constant) continue;
                if (consumers.at(a) != 1) continue;
                const Tensor& payload = m.weights.get(cst.weight);
                const auto& d = payload.dims();
                const bool chan_vec =
                    (d.size() == 1 && d[0] == conv.conv.out_channels) ||
                    (d.size() == 4 && d[0] == conv.conv.out_channels && d[1] == 1 &&
                     d[2] == 1 && d[3] == 1);
                if (!chan_vec) continue;

                Node fused = conv;
                fused.id = n.id;
                fused.conv.bias = true;
                fused.bias = unique_name(m.weights, conv.weight + ".fused_bias");
                m.weights.add(fused.bias,
                              Tensor::from_data({conv.conv.out_channels},
                                                {payload.values().begin(),
                                                 payload.values().end()}));

                const int64_t conv_id = a, cst_id = b;
                const bool drop_cst = consumers.at(cst_id) == 1;
                m.graph.nodes[i] = std::move(fused);
                std::erase_if(m.graph.nodes, [&](const Node& x) {
                    return x.id == conv_id ||
                           (drop_cst && x.kind == OpKind::constant && x.id == cst_id);
                });
                return true;
            }
        }

        // conv + relu -> conv with fused_relu.
        if (n.kind == OpKind::relu && !is_graph_input(n.inputs[0])) {
            const Node& conv = m.graph.nodes[node_of.at(n.inputs[0])];
            if (conv.kind == OpKind::conv && !conv.fused_relu &&
                consumers.at(conv.id) == 1) {
                Node fused = conv;
                fused.id = n.id;
                fused.fused_relu = true;
                const int64_t conv_id = conv.id;
                m.graph.nodes[i] = std::move(fused);
                std::erase_if(m.graph.nodes,
                              [&](const Node& x) { return x.id == conv_id; });
                return true;
            }
        }
    }
    return false;
}

}  // namespace

Model fuse_nodes(Model m) {
    m.graph.validate(m.weights);
    while (fuse_one(m)) {
    }
    // Fusions can orphan constant payloads when the constant node had other
    // consumers that later fused too; a validate keeps the invariants honest.
    m.graph.validate(m.weights);
    return m;
}

Model optimize(Model m, const std::vector<std::string>& passes) {
    for (const auto& p : passes)
        if (p != "fold" && p != "eliminate" && p != "fuse")
            throw validation_error("optimize: unknown pass '" + p + "'");

    std::vector<uint8_t> before = serialize_bytes(m.graph, m.weights);
    for (int round = 0; round < 8; ++round) {
        for (const auto& p : passes) {
            if (p == "fold") m = fold_constants(std::move(m));
            else if (p == "eliminate") m = eliminate_redundant(std::move(m));
            else m = fuse_nodes(std::move(m));
        }
        std::vector<uint8_t> after = serialize_bytes(m.graph, m.weights);
        if (after == before) break;
        before = std::move(after);
    }
    return m;
}

}  // namespace cobra
