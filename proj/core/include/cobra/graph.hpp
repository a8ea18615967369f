#ifndef COBRA_GRAPH_HPP
#define COBRA_GRAPH_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cobra/kernels.hpp"
#include "cobra/tensor.hpp"

namespace cobra {

enum class OpKind : uint8_t {
    conv = 0,
    conv_transpose = 1,
    relu = 2,
    add = 3,
    concat = 4,
    constant = 5,
    identity = 6,
};

const char* op_kind_name(OpKind k);

// Reference to a tensor value: id >= 0 names the node that produces it,
// ref < 0 names graph input -(ref + 1).
using TensorRef = int64_t;

inline constexpr TensorRef graph_input_ref(int64_t input_index) {
    return -(input_index + 1);
}
inline constexpr bool is_graph_input(TensorRef r) { return r < 0; }
inline constexpr int64_t graph_input_index(TensorRef r) { return -r - 1; }

struct Node {
    int64_t id = 0;
    OpKind kind = OpKind::identity;
    std::vector<TensorRef> inputs;

    // conv / conv_transpose only.
    ConvSpec conv;
    bool fused_relu = false;

    // WeightStore names: conv kernel (or a constant node's payload) and bias.
    std::string weight;
    std::string bias;

    bool operator==(const Node&) const = default;
};

struct GraphInput {
    std::string name;
    std::vector<int64_t> dims;
    bool operator==(const GraphInput&) const = default;
};

struct GraphOutput {
    std::string name;
    TensorRef ref = 0;
    bool operator==(const GraphOutput&) const = default;
};

// Named f32 tensors with stable insertion order (serialization is
// order-sensitive so round-trips are bit-exact).
class WeightStore {
public:
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw validation_error("weight store: missing entry " + name);
        return entries_[it->second].second;
    }

    void add(const std::string& name, Tensor t) {
        if (name.empty()) throw validation_error("weight store: empty name");
        if (contains(name)) throw validation_error("weight store: duplicate name " + name);
        index_.emplace(name, entries_.size());
        entries_.emplace_back(name, std::move(t));
    }

    void erase(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) return;
        entries_.erase(entries_.begin() + static_cast<int64_t>(it->second));
        index_.clear();
        for (size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].first, i);
    }

    size_t size() const { return entries_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& [name, t] : entries_) n += t.numel();
        return n;
    }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, size_t> index_;
};

// A DAG of tensor ops. `nodes` is kept in topological order: every node may
// reference only graph inputs and nodes earlier in the list (validate
// enforces this, which doubles as the acyclicity proof).
struct Graph {
    std::vector<GraphInput> inputs;
    std::vector<Node> nodes;
    std::vector<GraphOutput> outputs;

    // id -> index into nodes.
    std::unordered_map<int64_t, size_t> build_index() const;

    // Structural checks: topological input ordering, unique ids, attribute
    // sets matching op kinds, resolvable weight references, outputs present.
    void validate(const WeightStore& w) const;

    // Output dims per node id, walking the stored order. Shapes flow from
    // the declared graph input dims. Throws on any inconsistency.
    std::unordered_map<int64_t, std::vector<int64_t>> infer_shapes(const WeightStore& w) const;

    bool operator==(const Graph&) const = default;
};

// Dims of the tensor a node produces given already-inferred input dims;
// shared by shape inference, the planners and the executors.
std::vector<int64_t> node_output_dims(
    const Node& n, const std::vector<std::vector<int64_t>>& input_dims,
    const WeightStore& w);

}  // namespace cobra

#endif
