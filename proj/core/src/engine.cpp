#include "cobra/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <new>

namespace cobra {

namespace {

int64_t numel_of(const std::vector<int64_t>& dims) {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
}

// (C,D,H,W) or per-channel (C) views for kernel dispatch.
ConstView4 const_view(const float* p, const std::vector<int64_t>& dims) {
    if (dims.size() == 4) return {p, dims[0], dims[1], dims[2], dims[3]};
    if (dims.size() == 1) return {p, dims[0], 1, 1, 1};
    if (dims.size() == 3) return {p, 1, dims[0], dims[1], dims[2]};
    throw validation_error("engine: unsupported tensor rank " + std::to_string(dims.size()));
}

View4 mut_view(float* p, const std::vector<int64_t>& dims) {
    const ConstView4 c = const_view(p, dims);
    return {p, c.c, c.d, c.h, c.w};
}

}  // namespace

MemoryPlan plan_memory(const Graph& g, const WeightStore& w) {
    const auto dims = g.infer_shapes(w);
    const auto node_of = g.build_index();

    // Position of each node's last consumer; outputs stay live forever.
    std::unordered_map<int64_t, size_t> last_use;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        last_use.emplace(g.nodes[i].id, i);  // self, so unconsumed nodes free at once
        for (TensorRef r : g.nodes[i].inputs)
            if (!is_graph_input(r)) last_use[r] = i;
    }
    constexpr size_t kForever = static_cast<size_t>(-1);
    for (const auto& out : g.outputs)
        if (!is_graph_input(out.ref)) last_use[out.ref] = kForever;

    MemoryPlan plan;
    std::vector<int64_t> free_buffers;  // indices into plan.buffer_bytes
    std::unordered_map<int64_t, size_t> def_pos;

    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const Node& n = g.nodes[i];
        def_pos[n.id] = i;
        if (n.kind != OpKind::constant) {
            const int64_t bytes = numel_of(dims.at(n.id)) * 4;
            plan.naive_bytes += bytes;

            // Best fit among free buffers; otherwise grow the largest free
            // one; otherwise open a new buffer.
            int64_t best = -1;
            for (size_t fi = 0; fi < free_buffers.size(); ++fi) {
                const int64_t b = free_buffers[fi];
                if (plan.buffer_bytes[b] >= bytes &&
                    (best < 0 || plan.buffer_bytes[b] <
                                     plan.buffer_bytes[free_buffers[best]]))
                    best = static_cast<int64_t>(fi);
            }
            if (best < 0 && !free_buffers.empty()) {
                best = 0;
                for (size_t fi = 1; fi < free_buffers.size(); ++fi)
                    if (plan.buffer_bytes[free_buffers[fi]] >
                        plan.buffer_bytes[free_buffers[best]])
                        best = static_cast<int64_t>(fi);
                plan.buffer_bytes[free_buffers[best]] = bytes;
            }
            int buffer;
            if (best >= 0) {
                buffer = static_cast<int>(free_buffers[best]);
                free_buffers.erase(free_buffers.begin() + best);
            } else {
                buffer = static_cast<int>(plan.buffer_bytes.size());
                plan.buffer_bytes.push_back(bytes);
            }
            plan.binding.emplace(n.id, buffer);
        } else {
            plan.naive_bytes += numel_of(dims.at(n.id)) * 4;
        }

        // Inputs whose last consumer just ran release their buffers. The
        // node's own output was bound first, so inputs and output never
        // alias. Guard against duplicate inputs (add(x, x)): releasing the
        // same buffer twice would hand it to two concurrently live tensors.
        const auto release = [&](int64_t id) {
            const int64_t b = plan.binding.at(id);
            if (std::find(free_buffers.begin(), free_buffers.end(), b) ==
                free_buffers.end())
                free_buffers.push_back(b);
        };
        for (TensorRef r : n.inputs) {
            if (is_graph_input(r)) continue;
            if (last_use.at(r) == i && plan.binding.count(r)) release(r);
        }
        // A node nothing consumes frees its own buffer immediately.
        if (last_use.at(n.id) == i && plan.binding.count(n.id)) release(n.id);
    }

    // Soundness sweep: no two tensors with overlapping [def, last_use]
    // intervals may share a buffer.
    std::vector<std::pair<int64_t, int64_t>> bound(plan.binding.begin(), plan.binding.end());
    for (size_t a = 0; a < bound.size(); ++a)
        for (size_t b = a + 1; b < bound.size(); ++b) {
            if (bound[a].second != bound[b].second) continue;
            const size_t a0 = def_pos.at(bound[a].first), a1 = last_use.at(bound[a].first);
            const size_t b0 = def_pos.at(bound[b].first), b1 = last_use.at(bound[b].first);
            if (a0 <= b1 && b0 <= a1)
                throw validation_error("memory plan: overlapping lifetimes share buffer");
        }
    return plan;
}

struct Executor::Step {
    const Node* node;
    std::vector<const float*> in_ptrs;          // null for graph inputs (late-bound)
    std::vector<int64_t> in_graph_input;        // index when late-bound, else -1
    std::vector<std::vector<int64_t>> in_dims;
    float* out_ptr = nullptr;                   // null for constants
    std::vector<int64_t> out_dims;
    const float* weight = nullptr;
    const float* bias = nullptr;
};

Executor::Executor(const Graph& g, const WeightStore& w, int threads)
    : graph_(g), weights_(w), plan_(plan_memory(g, w)) {
    if (threads < 1) throw validation_error("executor: threads must be >= 1");
    if (threads > 1) pool_ = std::make_unique<ThreadPool>(threads);

    buffers_.resize(plan_.buffer_bytes.size());
    for (size_t i = 0; i < buffers_.size(); ++i)
        buffers_[i] = static_cast<float*>(::operator new(
            static_cast<size_t>(plan_.buffer_bytes[i]), std::align_val_t(64)));

    const auto dims = g.infer_shapes(w);
    const auto node_of = g.build_index();

    auto ptr_of = [&](TensorRef r) -> const float* {
        const Node& p = g.nodes[node_of.at(r)];
        if (p.kind == OpKind::constant) return w.get(p.weight).data();
        return buffers_[plan_.binding.at(r)];
    };

    steps_.reserve(g.nodes.size());
    for (const auto& n : g.nodes) {
        Step s;
        s.node = &n;
        s.out_dims = dims.at(n.id);
        if (n.kind != OpKind::constant) s.out_ptr = buffers_[plan_.binding.at(n.id)];
        for (TensorRef r : n.inputs) {
            if (is_graph_input(r)) {
                s.in_ptrs.push_back(nullptr);
                s.in_graph_input.push_back(graph_input_index(r));
                s.in_dims.push_back(g.inputs[graph_input_index(r)].dims);
            } else {
                s.in_ptrs.push_back(ptr_of(r));
                s.in_graph_input.push_back(-1);
                s.in_dims.push_back(dims.at(r));
            }
        }
        if (!n.weight.empty() && n.kind != OpKind::constant)
            s.weight = w.get(n.weight).data();
        if (!n.bias.empty()) s.bias = w.get(n.bias).data();
        steps_.push_back(std::move(s));
    }
}

Executor::~Executor() {
    for (size_t i = 0; i < buffers_.size(); ++i)
        ::operator delete(buffers_[i], std::align_val_t(64));
}

int Executor::thread_count() const { return pool_ ? pool_->thread_count() : 1; }

std::vector<Tensor> Executor::run_multi(const std::vector<Tensor>& inputs) {
    if (inputs.size() != graph_.inputs.size())
        throw validation_error("executor: expected " + std::to_string(graph_.inputs.size()) +
                               " inputs, got " + std::to_string(inputs.size()));
    for (size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].dims() != graph_.inputs[i].dims)
            throw validation_error("executor: input '" + graph_.inputs[i].name +
                                   "' has unexpected dims");

    timings_.clear();
    timings_.reserve(steps_.size());
    ThreadPool* pool = pool_.get();

    for (const Step& s : steps_) {
        const auto t0 = std::chrono::steady_clock::now();
        const Node& n = *s.node;

        auto in_ptr = [&](size_t i) -> const float* {
            return s.in_ptrs[i] ? s.in_ptrs[i] : inputs[s.in_graph_input[i]].data();
        };

        switch (n.kind) {
            case OpKind::constant:
                break;
            case OpKind::identity:
                std::memcpy(s.out_ptr, in_ptr(0), numel_of(s.out_dims) * 4);
                break;
            case OpKind::relu:
                relu_into(mut_view(s.out_ptr, s.out_dims),
                          const_view(in_ptr(0), s.in_dims[0]), pool);
                break;
            case OpKind::add:
                add_into(mut_view(s.out_ptr, s.out_dims),
                         const_view(in_ptr(0), s.in_dims[0]),
                         const_view(in_ptr(1), s.in_dims[1]), pool);
                break;
            case OpKind::concat:
                concat_into(mut_view(s.out_ptr, s.out_dims),
                            const_view(in_ptr(0), s.in_dims[0]),
                            const_view(in_ptr(1), s.in_dims[1]));
                break;
            case OpKind::conv:
                conv3d_fast_into(const_view(in_ptr(0), s.in_dims[0]), s.weight,
                                 n.conv.bias ? s.bias : nullptr, n.conv,
                                 mut_view(s.out_ptr, s.out_dims), pool, n.fused_relu);
                break;
            case OpKind::conv_transpose:
                conv_transpose3d_into(const_view(in_ptr(0), s.in_dims[0]), s.weight,
                                      n.conv.bias ? s.bias : nullptr, n.conv,
                                      mut_view(s.out_ptr, s.out_dims), pool);
                break;
        }

        const auto t1 = std::chrono::steady_clock::now();
        // Constants are free; a timing row would just be noise in reports.
        if (n.kind != OpKind::constant)
            timings_.push_back(
                {n.id, n.kind, std::chrono::duration<double>(t1 - t0).count()});
    }

    const auto node_of = graph_.build_index();
    std::vector<Tensor> outs;
    outs.reserve(graph_.outputs.size());
    for (const auto& out : graph_.outputs) {
        if (is_graph_input(out.ref)) {
            outs.push_back(inputs[graph_input_index(out.ref)]);
            continue;
        }
        // steps_ parallels graph_.nodes, so the index map serves both.
        const Step& s = steps_[node_of.at(out.ref)];
        Tensor t(s.out_dims);
        const float* src = s.node->kind == OpKind::constant
                               ? weights_.get(s.node->weight).data()
                               : s.out_ptr;
        std::memcpy(t.data(), src, t.numel() * 4);
        outs.push_back(std::move(t));
    }
    return outs;
}

Tensor Executor::run(const Tensor& input) {
    auto outs = run_multi({input});
    if (outs.size() != 1)
        throw validation_error("executor: run() requires a single-output graph");
    return std::move(outs[0]);
}

Tensor execute(const Graph& g, const WeightStore& w, const Tensor& input, int threads) {
    Executor ex(g, w, threads);
    return ex.run(input);
}

Tensor eval_node_reference(const Node& n, const std::vector<const Tensor*>& inputs,
                           const WeightStore& w) {
    switch (n.kind) {
        case OpKind::constant:
            return w.get(n.weight);
        case OpKind::identity:
            return *inputs[0];
        case OpKind::relu:
            return relu(*inputs[0]);
        case OpKind::add:
            return add(*inputs[0], *inputs[1]);
        case OpKind::concat:
            return concat_channels(*inputs[0], *inputs[1]);
        case OpKind::conv: {
            Tensor out = conv3d_direct(*inputs[0], w.get(n.weight),
                                       n.conv.bias ? &w.get(n.bias) : nullptr, n.conv);
            if (n.fused_relu) out = relu(out);
            return out;
        }
        case OpKind::conv_transpose:
            return conv_transpose3d(*inputs[0], w.get(n.weight),
                                    n.conv.bias ? &w.get(n.bias) : nullptr, n.conv,
                                    nullptr);
    }
    throw validation_error("eval: unknown op kind");
}

std::vector<Tensor> execute_reference(const Graph& g, const WeightStore& w,
                                      const std::vector<Tensor>& inputs) {
    g.validate(w);
    if (inputs.size() != g.inputs.size())
        throw validation_error("reference interpreter: input count mismatch");
    for (size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].dims() != g.inputs[i].dims)
            throw validation_error("reference interpreter: input dims mismatch");

    std::unordered_map<int64_t, Tensor> values;
    auto value_of = [&](TensorRef r) -> const Tensor& {
        if (is_graph_input(r)) return inputs[graph_input_index(r)];
        return values.at(r);
    };
    for (const auto& n : g.nodes) {
        std::vector<const Tensor*> ins;
        ins.reserve(n.inputs.size());
        for (TensorRef r : n.inputs) ins.push_back(&value_of(r));
        values.emplace(n.id, eval_node_reference(n, ins, w));
    }

    std::vector<Tensor> outs;
    for (const auto& out : g.outputs) outs.push_back(value_of(out.ref));
    return outs;
}

RunReport benchmark_model(const Graph& g, const WeightStore& w, const Tensor& input,
                          int runs, int threads) {
    if (runs < 2) throw validation_error("benchmark: need at least 2 runs (1 warmup)");
    Executor ex(g, w, threads);

    RunReport report;
    report.threads = threads;
    report.peak_bytes = ex.plan().peak_bytes();
    for (int r = 0; r < runs; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        Tensor out = ex.run(input);
        const auto t1 = std::chrono::steady_clock::now();
        if (r == 0) continue;  // warmup
        report.run_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    report.node_seconds = ex.last_node_timings();

    std::vector<double> sorted = report.run_seconds;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    report.median_seconds =
        n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return report;
}

}  // namespace cobra
