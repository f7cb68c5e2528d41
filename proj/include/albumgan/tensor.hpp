#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace albumgan {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when an operation receives tensors whose shapes cannot be combined.
class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces or receives NaN/Inf.
class NonFiniteError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class Tensor;
struct TensorImpl;

// Receives the upstream gradient and the node that produced it; returns one
// gradient per recorded parent (an undefined Tensor means "no contribution").
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out, const Tensor& self)>;

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::shared_ptr<TensorImpl> grad;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    BackwardFn backward;
    const char* op = "leaf";
};

/// Shared handle to a dense float32 array that can take part in reverse-mode
/// differentiation. Copies alias the same storage; op results are fresh nodes
/// and never written after construction.
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape);
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, float value);
    static Tensor scalar(float value);
    static Tensor from(Shape shape, std::vector<float> values);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const float> data() const;
    // Leaf tensors only; used by initializers and optimizers.
    std::span<float> mutable_data();
    float item() const;
    float at(std::initializer_list<std::size_t> index) const;
    std::vector<float> to_vector() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on = true);
    bool is_leaf() const;
    std::optional<Tensor> grad() const;
    void zero_grad();
    void set_grad(const Tensor& g);

    // Same values, cut from the graph.
    Tensor detach() const;
    Tensor clone() const;

    const char* op_name() const;
    TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& shared_impl() const { return impl_; }

   private:
    std::shared_ptr<TensorImpl> impl_;
};

bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

/// Re-enables recording inside an outer NoGradGuard (used for higher-order gradients).
class EnableGradGuard {
   public:
    explicit EnableGradGuard(bool on);
    ~EnableGradGuard();
    EnableGradGuard(const EnableGradGuard&) = delete;
    EnableGradGuard& operator=(const EnableGradGuard&) = delete;

   private:
    bool previous_;
};

namespace detail {

// Builds an op result, validates finiteness and records the backward closure
// when any input participates in differentiation.
Tensor make_result(Shape shape, std::vector<float> values, std::initializer_list<Tensor> inputs,
                   const char* op, BackwardFn backward);
Tensor make_result(Shape shape, std::vector<float> values, const std::vector<Tensor>& inputs,
                   const char* op, BackwardFn backward);

void check_finite(std::span<const float> values, const char* op);

}  // namespace detail

}  // namespace albumgan
