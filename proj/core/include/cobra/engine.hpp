#ifndef COBRA_ENGINE_HPP
#define COBRA_ENGINE_HPP

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cobra/graph.hpp"
#include "cobra/thread_pool.hpp"

namespace cobra {

// Static buffer assignment for a graph's intermediate tensors. Constants
// execute in place from the weight store and get no buffer.
struct MemoryPlan {
    std::vector<int64_t> buffer_bytes;          // pool, one entry per buffer
    std::unordered_map<int64_t, int> binding;   // node id -> buffer index
    int64_t naive_bytes = 0;                    // sum of all tensor sizes, for comparison

    int64_t peak_bytes() const {
        int64_t n = 0;
        for (int64_t b : buffer_bytes) n += b;
        return n;
    }
};

// Greedy interval reuse over the stored topological order: a node's output
// buffer is claimed while its inputs are still live (kernels read and write
// concurrently, so no aliasing), and an input's buffer frees once its last
// consumer has run. Graph outputs never free. The plan is cross-checked for
// lifetime overlaps before being returned.
MemoryPlan plan_memory(const Graph& g, const WeightStore& w);

struct NodeTiming {
    int64_t id;
    OpKind kind;
    double seconds;
};

struct RunReport {
    std::vector<double> run_seconds;       // timed samples, warmup discarded
    double median_seconds = 0.0;
    std::vector<NodeTiming> node_seconds;  // breakdown of the last run
    int64_t peak_bytes = 0;
    int threads = 1;
};

// Executes a graph against a fixed memory plan. Buffers are allocated once
// (64-byte aligned) and reused across run() calls, so repeated inference does
// not grow the heap. One Executor serves one inference at a time; concurrent
// scans need one Executor each (Graph/WeightStore may be shared read-only).
class Executor {
public:
    // Keeps references to g and w; both must outlive the executor.
    Executor(const Graph& g, const WeightStore& w, int threads);
    ~Executor();

    Executor(const Executor&) = delete;
    Executor& operator=(const Executor&) = delete;

    // Single-input single-output convenience; validates the input dims.
    Tensor run(const Tensor& input);
    std::vector<Tensor> run_multi(const std::vector<Tensor>& inputs);

    const MemoryPlan& plan() const { return plan_; }
    const std::vector<NodeTiming>& last_node_timings() const { return timings_; }
    int thread_count() const;

private:
    struct Step;
    const Graph& graph_;
    const WeightStore& weights_;
    MemoryPlan plan_;
    std::vector<Step> steps_;
    std::vector<float*> buffers_;
    std::vector<NodeTiming> timings_;
    std::unique_ptr<ThreadPool> pool_;
};

// One-shot convenience around Executor.
Tensor execute(const Graph& g, const WeightStore& w, const Tensor& input, int threads = 1);

// Node-by-node evaluation with the reference kernels (conv3d_direct for
// every convolution). Slow; exists as the executor's oracle and as the
// evaluator behind constant folding.
Tensor eval_node_reference(const Node& n, const std::vector<const Tensor*>& inputs,
                           const WeightStore& w);
std::vector<Tensor> execute_reference(const Graph& g, const WeightStore& w,
                                      const std::vector<Tensor>& inputs);

// runs >= 2: the first run warms buffers and is discarded; the median is
// over the remaining runs.
RunReport benchmark_model(const Graph& g, const WeightStore& w, const Tensor& input,
                          int runs, int threads);

}  // namespace cobra

#endif
