#include "albumgan/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace albumgan {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor Tensor::full(Shape shape, float value) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(albumgan::numel(shape), value);
    impl->shape = std::move(shape);
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0f); }
Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0f); }
Tensor Tensor::scalar(float value) { return full(Shape{}, value); }

Tensor Tensor::from(Shape shape, std::vector<float> values) {
    if (albumgan::numel(shape) != values.size()) {
        throw ShapeError("Tensor::from: shape " + to_string(shape) + " needs " +
                         std::to_string(albumgan::numel(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const {
    if (!impl_) throw std::logic_error("undefined tensor");
    return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw ShapeError("axis out of range for shape " + to_string(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const float> Tensor::data() const {
    if (!impl_) throw std::logic_error("undefined tensor");
    return impl_->data;
}

std::span<float> Tensor::mutable_data() {
    if (!impl_) throw std::logic_error("undefined tensor");
    if (impl_->backward) throw std::logic_error("mutable_data on a non-leaf tensor");
    return impl_->data;
}

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return impl_->data[0];
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw ShapeError("at(): rank mismatch");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= s[axis]) throw ShapeError("at(): index out of range");
        flat = flat * s[axis] + i;
        ++axis;
    }
    return impl_->data[flat];
}

std::vector<float> Tensor::to_vector() const {
    auto d = data();
    return {d.begin(), d.end()};
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!impl_) throw std::logic_error("undefined tensor");
    if (impl_->backward) throw std::logic_error("set_requires_grad on a non-leaf tensor");
    impl_->requires_grad = on;
    return *this;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->backward; }

std::optional<Tensor> Tensor::grad() const {
    if (!impl_ || !impl_->grad) return std::nullopt;
    return Tensor(impl_->grad);
}

void Tensor::zero_grad() {
    if (impl_) impl_->grad.reset();
}

void Tensor::set_grad(const Tensor& g) {
    if (!impl_) throw std::logic_error("undefined tensor");
    if (g.defined() && g.shape() != impl_->shape) {
        throw ShapeError("gradient shape " + to_string(g.shape()) + " does not match " +
                         to_string(impl_->shape));
    }
    impl_->grad = g.shared_impl();
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape();
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

Tensor Tensor::clone() const { return detach(); }

const char* Tensor::op_name() const { return impl_ ? impl_->op : "undefined"; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

EnableGradGuard::EnableGradGuard(bool on) : previous_(g_grad_enabled) { g_grad_enabled = on; }
EnableGradGuard::~EnableGradGuard() { g_grad_enabled = previous_; }

namespace detail {

void check_finite(std::span<const float> values, const char* op) {
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string("non-finite value produced by ") + op);
        }
    }
}

Tensor make_result(Shape shape, std::vector<float> values, const std::vector<Tensor>& inputs,
                   const char* op, BackwardFn backward) {
    check_finite(values, op);
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->op = op;
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& in : inputs) any = any || in.requires_grad();
        if (any) {
            impl->requires_grad = true;
            impl->parents.reserve(inputs.size());
            for (const auto& in : inputs) impl->parents.push_back(in.shared_impl());
            impl->backward = std::move(backward);
        }
    }
    return Tensor(std::move(impl));
}

Tensor make_result(Shape shape, std::vector<float> values, std::initializer_list<Tensor> inputs,
                   const char* op, BackwardFn backward) {
    return make_result(std::move(shape), std::move(values), std::vector<Tensor>(inputs), op,
                       std::move(backward));
}

}  // namespace detail

}  // namespace albumgan
