#pragma once

#include <memory>
#include <span>
#include <vector>

#include "albumgan/tensor.hpp"

namespace albumgan {

/// Differentiable nodes reachable from a root, in topological order: every
/// node appears after all of its inputs.
class Tape {
   public:
    static Tape record(const Tensor& root);

    std::span<const std::shared_ptr<TensorImpl>> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

   private:
    std::vector<std::shared_ptr<TensorImpl>> nodes_;
};

/// Accumulates d(loss)/d(leaf) into the grad of every leaf that requires it.
/// With create_graph the gradients are themselves differentiable.
void backward(const Tensor& loss, bool create_graph = false);

/// Returns d(output)/d(input) for each input without touching stored grads.
/// Inputs that `output` does not depend on get a zero tensor.
std::vector<Tensor> gradients(const Tensor& output, const std::vector<Tensor>& inputs,
                              bool create_graph = false);

}  // namespace albumgan
