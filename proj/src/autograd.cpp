#include "albumgan/autograd.hpp"

#include <unordered_map>
#include <unordered_set>

#include "albumgan/ops.hpp"

namespace albumgan {

Tape Tape::record(const Tensor& root) {
    Tape tape;
    if (!root.requires_grad()) return tape;
    std::unordered_set<const TensorImpl*> visited;
    // Iterative post-order DFS.
    std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> stack;
    stack.emplace_back(root.shared_impl(), 0);
    visited.insert(root.impl());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto parent = node->parents[next++];
            if (parent->requires_grad && visited.insert(parent.get()).second) {
                stack.emplace_back(std::move(parent), 0);
            }
            continue;
        }
        tape.nodes_.push_back(node);
        stack.pop_back();
    }
    return tape;
}

namespace {

std::unordered_map<const TensorImpl*, Tensor> run_engine(const Tensor& root, bool create_graph,
                                                         bool accumulate_leaves) {
    if (!root.defined()) throw std::logic_error("backward on an undefined tensor");
    if (root.numel() != 1) {
        throw ShapeError("backward requires a scalar output, got shape " + to_string(root.shape()));
    }
    if (!root.requires_grad()) throw std::logic_error("backward on a tensor that does not require grad");

    const Tape tape = Tape::record(root);
    EnableGradGuard mode(create_graph);

    std::unordered_map<const TensorImpl*, Tensor> grads;
    grads[root.impl()] = Tensor::ones(root.shape());
    std::unordered_map<const TensorImpl*, Tensor> leaf_grads;

    auto nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const auto& node = *it;
        auto found = grads.find(node.get());
        if (found == grads.end()) continue;
        Tensor g = found->second;
        if (!node->backward) {
            leaf_grads[node.get()] = g;
            if (accumulate_leaves) {
                Tensor leaf(node);
                auto prev = leaf.grad();
                leaf.set_grad(prev ? add(*prev, g) : g);
            }
            continue;
        }
        auto parent_grads = node->backward(g, Tensor(node));
        for (std::size_t i = 0; i < node->parents.size() && i < parent_grads.size(); ++i) {
            const auto& parent = node->parents[i];
            const Tensor& pg = parent_grads[i];
            if (!parent->requires_grad || !pg.defined()) continue;
            auto& slot = grads[parent.get()];
            slot = slot.defined() ? add(slot, pg) : pg;
        }
        // Non-leaf gradients are kept so gradients() can report them.
    }
    for (auto& [impl, g] : leaf_grads) grads[impl] = g;
    return grads;
}

}  // namespace

void backward(const Tensor& loss, bool create_graph) { run_engine(loss, create_graph, true); }

std::vector<Tensor> gradients(const Tensor& output, const std::vector<Tensor>& inputs, bool create_graph) {
    auto grads = run_engine(output, create_graph, false);
    std::vector<Tensor> result;
    result.reserve(inputs.size());
    for (const auto& in : inputs) {
        auto found = grads.find(in.impl());
        result.push_back(found != grads.end() ? found->second : Tensor::zeros(in.shape()));
    }
    return result;
}

}  // namespace albumgan
