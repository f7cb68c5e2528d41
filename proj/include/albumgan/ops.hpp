#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "albumgan/tensor.hpp"

// Differentiable operations. Every backward is itself written with these ops,
// so gradients can be differentiated again (needed by the gradient penalty).
namespace albumgan {

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, float b);
Tensor mul(const Tensor& a, float b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, float b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, float b) { return add(a, -b); }
inline Tensor operator*(const Tensor& a, float b) { return mul(a, b); }
inline Tensor operator*(float a, const Tensor& b) { return mul(b, a); }

Shape broadcast_shapes(const Shape& a, const Shape& b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, float lo, float hi);

enum class ActivationKind { identity, sigmoid, tanh, relu, leaky_relu };

struct Activation {
    ActivationKind kind = ActivationKind::identity;
    float slope = 0.2f;  // leaky_relu only

    static Activation identity() { return {}; }
    static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0f}; }
    static Activation tanh() { return {ActivationKind::tanh, 0.0f}; }
    static Activation relu() { return {ActivationKind::relu, 0.0f}; }
    static Activation leaky_relu(float a) { return {ActivationKind::leaky_relu, a}; }
};

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope);
// Rejects non-finite inputs and leaky slopes outside (0, 1).
Tensor activation(const Activation& act, const Tensor& x);

// Reductions accumulate in double precision.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim);
Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim);
// Sums broadcast dimensions away so that the result has `shape`.
Tensor sum_to(const Tensor& x, const Shape& shape);
Tensor expand(const Tensor& x, const Shape& shape);

Tensor reshape(const Tensor& x, Shape shape);
// [N, ...] -> [N, prod(...)].
Tensor flatten(const Tensor& x);
Tensor transpose(const Tensor& x);
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [N, C, H, W], k: [F, C, kh, kw] -> [N, F, Ho, Wo], zero padding.
Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t padding);
// x: [N, F, H, W], k: [F, C, kh, kw] -> [N, C, (H-1)*stride - 2*padding + kh + output_padding, ...].
Tensor conv_transpose2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t padding,
                        std::size_t output_padding = 0);

enum class PoolKind { max, avg };
Tensor pool(PoolKind kind, const Tensor& x, std::size_t window, std::size_t stride);
Tensor max_pool2d(const Tensor& x, std::size_t window, std::size_t stride);
Tensor avg_pool2d(const Tensor& x, std::size_t window, std::size_t stride);
Tensor upsample_nearest2x(const Tensor& x);

using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

// out[i] = index[i] < 0 ? 0 : x.flat[index[i]].
Tensor gather(const Tensor& x, IndexMap index, Shape out_shape);
// out.flat[index[i]] += x[i] for index[i] >= 0.
Tensor scatter_add(const Tensor& x, IndexMap index, Shape out_shape);
Tensor index_select(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& indices);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

namespace detail {

Tensor conv_transpose2d_sized(const Tensor& x, const Tensor& k, std::size_t stride,
                              std::size_t padding, std::size_t out_h, std::size_t out_w);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, const Shape& kernel_shape,
                          std::size_t stride, std::size_t padding);
Tensor avg_pool2d_adjoint(const Tensor& g, std::size_t window, std::size_t stride,
                          std::size_t in_h, std::size_t in_w);

// C[M,N] (+)= A[M,K] * B[K,N], all row-major and contiguous.
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate);

}  // namespace detail

}  // namespace albumgan
