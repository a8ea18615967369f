#ifndef COBRA_PASSES_HPP
#define COBRA_PASSES_HPP

#include <string>
#include <vector>

#include "cobra/graph.hpp"

namespace cobra {

// A graph plus the weights it references; the unit the optimizer and
// serializer operate on.
struct Model {
    Graph graph;
    WeightStore weights;
};

// Evaluates every node whose inputs are all constants with the reference
// kernels and replaces it by a constant node (same id, so downstream
// references survive). Output names/count unchanged. Superseded weights
// become orphans for eliminate_redundant to sweep.
Model fold_constants(Model m);

// Splices out identity nodes, removes nodes unreachable from any output,
// and prunes weight entries no remaining node references. Idempotent.
Model eliminate_redundant(Model m);

// Pattern rewrites, applied while any matches:
//  - bias-less conv followed by add of a per-channel constant, conv consumed
//    only by that add -> biased conv (constant removed if unshared)
//  - conv followed by relu, conv consumed only by that relu -> conv with
//    fused_relu, executed in one pass by the engine
// The rewritten node takes the pattern tail's id.
Model fuse_nodes(Model m);

// Runs the passes in order, repeating the sequence until the serialized
// model stops changing (max 8 rounds). Valid names: "fold", "eliminate",
// "fuse".
Model optimize(Model m,
               const std::vector<std::string>& passes = {"fold", "eliminate", "fuse"});

}  // namespace cobra

#endif
