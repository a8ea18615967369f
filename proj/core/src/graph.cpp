#include "cobra/graph.hpp"

#include <unordered_set>

namespace cobra {

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::conv: return "conv";
        case OpKind::conv_transpose: return "conv_transpose";
        case OpKind::relu: return "relu";
        case OpKind::add: return "add";
        case OpKind::concat: return "concat";
        case OpKind::constant: return "constant";
        case OpKind::identity: return "identity";
    }
    return "?";
}

std::unordered_map<int64_t, size_t> Graph::build_index() const {
    std::unordered_map<int64_t, size_t> idx;
    idx.reserve(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (!idx.emplace(nodes[i].id, i).second)
            throw validation_error("graph: duplicate node id " + std::to_string(nodes[i].id));
    }
    return idx;
}

namespace {

size_t expected_input_count(OpKind k) {
    switch (k) {
        case OpKind::constant: return 0;
        case OpKind::conv:
        case OpKind::conv_transpose:
        case OpKind::relu:
        case OpKind::identity: return 1;
        case OpKind::add:
        case OpKind::concat: return 2;
    }
    return 0;
}

}  // namespace

void Graph::validate(const WeightStore& w) const {
    const auto idx = build_index();
    std::unordered_set<int64_t> defined;

    for (const auto& in : inputs) {
        if (in.dims.empty()) throw validation_error("graph: input with empty dims");
        for (int64_t d : in.dims)
            if (d < 1) throw validation_error("graph: input dims must be >= 1");
    }

    for (const auto& n : nodes) {
        if (n.inputs.size() != expected_input_count(n.kind))
            throw validation_error("graph: node " + std::to_string(n.id) + " (" +
                                   op_kind_name(n.kind) + ") has wrong input count");
        for (TensorRef r : n.inputs) {
            if (is_graph_input(r)) {
                if (graph_input_index(r) >= static_cast<int64_t>(inputs.size()))
                    throw validation_error("graph: node " + std::to_string(n.id) +
                                           " references missing graph input");
            } else if (!defined.count(r)) {
                // Either a forward/self reference (breaks topological order
                // and therefore acyclicity) or a dangling id.
                throw validation_error("graph: node " + std::to_string(n.id) +
                                       " references node " + std::to_string(r) +
                                       " not defined before it");
            }
        }
        const bool is_conv = n.kind == OpKind::conv || n.kind == OpKind::conv_transpose;
        if (is_conv) {
            n.conv.validate();
            if (n.weight.empty() || !w.contains(n.weight))
                throw validation_error("graph: node " + std::to_string(n.id) +
                                       " has unresolved weight '" + n.weight + "'");
            if (n.conv.bias && (n.bias.empty() || !w.contains(n.bias)))
                throw validation_error("graph: node " + std::to_string(n.id) +
                                       " has unresolved bias '" + n.bias + "'");
        } else {
            if (n.fused_relu)
                throw validation_error("graph: fused_relu on non-conv node " +
                                       std::to_string(n.id));
            if (n.kind == OpKind::constant) {
                if (n.weight.empty() || !w.contains(n.weight))
                    throw validation_error("graph: constant node " + std::to_string(n.id) +
                                           " has unresolved payload");
            } else if (!n.weight.empty() || !n.bias.empty()) {
                throw validation_error("graph: weight refs on non-conv node " +
                                       std::to_string(n.id));
            }
        }
        defined.insert(n.id);
    }

    if (outputs.empty()) throw validation_error("graph: no outputs");
    for (const auto& out : outputs) {
        if (is_graph_input(out.ref)) {
            if (graph_input_index(out.ref) >= static_cast<int64_t>(inputs.size()))
                throw validation_error("graph: output references missing graph input");
        } else if (!defined.count(out.ref)) {
            throw validation_error("graph: output '" + out.name + "' references undefined node");
        }
    }
}

std::vector<int64_t> node_output_dims(
    const Node& n, const std::vector<std::vector<int64_t>>& input_dims,
    const WeightStore& w) {
    auto require_4d = [&](const std::vector<int64_t>& d, const char* what) {
        if (d.size() != 4)
            throw validation_error(std::string("shape inference: node ") +
                                   std::to_string(n.id) + ": " + what + " must be 4D");
    };

    switch (n.kind) {
        case OpKind::constant:
            return w.get(n.weight).dims();
        case OpKind::identity:
            return input_dims[0];
        case OpKind::relu:
            return input_dims[0];
        case OpKind::conv: {
            require_4d(input_dims[0], "conv input");
            if (input_dims[0][0] != n.conv.in_channels)
                throw validation_error("shape inference: node " + std::to_string(n.id) +
                                       ": input channels " + std::to_string(input_dims[0][0]) +
                                       " != spec " + std::to_string(n.conv.in_channels));
            const auto sp = conv_output_shape(
                n.conv, {input_dims[0][1], input_dims[0][2], input_dims[0][3]});
            return {n.conv.out_channels, sp[0], sp[1], sp[2]};
        }
        case OpKind::conv_transpose: {
            require_4d(input_dims[0], "conv_transpose input");
            if (input_dims[0][0] != n.conv.in_channels)
                throw validation_error("shape inference: node " + std::to_string(n.id) +
                                       ": input channels mismatch");
            const auto sp = conv_transpose_output_shape(
                n.conv, {input_dims[0][1], input_dims[0][2], input_dims[0][3]});
            return {n.conv.out_channels, sp[0], sp[1], sp[2]};
        }
        case OpKind::add: {
            const auto& a = input_dims[0];
            const auto& b = input_dims[1];
            if (a == b) return a;
            // Per-channel broadcast: (C) or (C,1,1,1) onto (C,D,H,W).
            require_4d(a, "add lhs");
            const bool chan_vec = (b.size() == 1 && b[0] == a[0]) ||
                                  (b.size() == 4 && b[0] == a[0] && b[1] == 1 &&
                                   b[2] == 1 && b[3] == 1);
            if (!chan_vec)
                throw validation_error("shape inference: node " + std::to_string(n.id) +
                                       ": add operands not broadcastable");
            return a;
        }
        case OpKind::concat: {
            const auto& a = input_dims[0];
            const auto& b = input_dims[1];
            require_4d(a, "concat lhs");
            require_4d(b, "concat rhs");
            if (a[1] != b[1] || a[2] != b[2] || a[3] != b[3])
                throw validation_error("shape inference: node " + std::to_string(n.id) +
                                       ": concat spatial dims differ");
            return {a[0] + b[0], a[1], a[2], a[3]};
        }
    }
    throw validation_error("shape inference: unknown op kind");
}

std::unordered_map<int64_t, std::vector<int64_t>> Graph::infer_shapes(
    const WeightStore& w) const {
    validate(w);
    std::unordered_map<int64_t, std::vector<int64_t>> dims;
    dims.reserve(nodes.size());
    auto ref_dims = [&](TensorRef r) -> const std::vector<int64_t>& {
        if (is_graph_input(r)) return inputs[graph_input_index(r)].dims;
        return dims.at(r);
    };
    for (const auto& n : nodes) {
        std::vector<std::vector<int64_t>> in;
        in.reserve(n.inputs.size());
        for (TensorRef r : n.inputs) in.push_back(ref_dims(r));
        dims.emplace(n.id, node_output_dims(n, in, w));
    }
    return dims;
}

}  // namespace cobra
