#include "albumgan/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace albumgan {

using detail::make_result;

namespace {

// Strides of `src` when viewed as broadcast to `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& src, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t stride = 1;
    const std::size_t offset = out.size() - src.size();
    for (std::size_t i = src.size(); i-- > 0;) {
        if (src[i] != 1) strides[i + offset] = stride;
        stride *= src[i];
    }
    return strides;
}

// Calls fn(out_index, src_offset) for every element of `out`.
template <class Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& strides, Fn&& fn) {
    const std::size_t total = numel(out);
    const std::size_t rank = out.size();
    std::vector<std::size_t> counter(rank, 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < total; ++i) {
        fn(i, offset);
        for (std::size_t d = rank; d-- > 0;) {
            ++counter[d];
            offset += strides[d];
            if (counter[d] < out[d]) break;
            offset -= strides[d] * out[d];
            counter[d] = 0;
        }
    }
}

template <class F>
std::vector<float> binary_values(const Tensor& a, const Tensor& b, const Shape& out, F f) {
    std::vector<float> values(numel(out));
    auto da = a.data();
    auto db = b.data();
    if (a.shape() == out && b.shape() == out) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(da[i], db[i]);
        return values;
    }
    if (a.shape() == out && b.numel() == 1) {
        const float bv = db[0];
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(da[i], bv);
        return values;
    }
    const auto sa = broadcast_strides(a.shape(), out);
    const auto sb = broadcast_strides(b.shape(), out);
    // Walk a and b offsets together.
    const std::size_t rank = out.size();
    std::vector<std::size_t> counter(rank, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = f(da[oa], db[ob]);
        for (std::size_t d = rank; d-- > 0;) {
            ++counter[d];
            oa += sa[d];
            ob += sb[d];
            if (counter[d] < out[d]) break;
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            counter[d] = 0;
        }
    }
    return values;
}

template <class F>
std::vector<float> unary_values(const Tensor& x, F f) {
    auto d = x.data();
    std::vector<float> values(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) values[i] = f(d[i]);
    return values;
}

Tensor constant_like(const Tensor& x, std::vector<float> values) {
    return Tensor::from(x.shape(), std::move(values));
}

IndexMap make_index(std::vector<std::int64_t> v) {
    return std::make_shared<const std::vector<std::int64_t>>(std::move(v));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
    if (x.ndim() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         to_string(x.shape()));
    }
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
        }
        out[i] = da == 1 ? db : da;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    Shape out = broadcast_shapes(a.shape(), b.shape());
    auto values = binary_values(a, b, out, [](float x, float y) { return x + y; });
    return make_result(out, std::move(values), {a, b}, "add",
                       [sa = a.shape(), sb = b.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{sum_to(g, sa), sum_to(g, sb)};
                       });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Shape out = broadcast_shapes(a.shape(), b.shape());
    auto values = binary_values(a, b, out, [](float x, float y) { return x - y; });
    return make_result(out, std::move(values), {a, b}, "sub",
                       [sa = a.shape(), sb = b.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{sum_to(g, sa), sum_to(neg(g), sb)};
                       });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Shape out = broadcast_shapes(a.shape(), b.shape());
    auto values = binary_values(a, b, out, [](float x, float y) { return x * y; });
    return make_result(out, std::move(values), {a, b}, "mul",
                       [a, b](const Tensor& g, const Tensor&) {
                           Tensor ga, gb;
                           if (a.requires_grad()) ga = sum_to(mul(g, b), a.shape());
                           if (b.requires_grad()) gb = sum_to(mul(g, a), b.shape());
                           return std::vector<Tensor>{ga, gb};
                       });
}

Tensor div(const Tensor& a, const Tensor& b) {
    Shape out = broadcast_shapes(a.shape(), b.shape());
    auto values = binary_values(a, b, out, [](float x, float y) { return x / y; });
    return make_result(out, std::move(values), {a, b}, "div",
                       [a, b](const Tensor& g, const Tensor& self) {
                           Tensor ga, gb;
                           if (a.requires_grad()) ga = sum_to(div(g, b), a.shape());
                           if (b.requires_grad()) gb = sum_to(neg(div(mul(g, self), b)), b.shape());
                           return std::vector<Tensor>{ga, gb};
                       });
}

Tensor add(const Tensor& a, float b) {
    auto values = unary_values(a, [b](float x) { return x + b; });
    return make_result(a.shape(), std::move(values), {a}, "add_scalar",
                       [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{g}; });
}

Tensor mul(const Tensor& a, float b) {
    auto values = unary_values(a, [b](float x) { return x * b; });
    return make_result(a.shape(), std::move(values), {a}, "mul_scalar",
                       [b](const Tensor& g, const Tensor&) { return std::vector<Tensor>{mul(g, b)}; });
}

Tensor neg(const Tensor& x) {
    auto values = unary_values(x, [](float v) { return -v; });
    return make_result(x.shape(), std::move(values), {x}, "neg",
                       [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{neg(g)}; });
}

Tensor exp(const Tensor& x) {
    auto values = unary_values(x, [](float v) { return std::exp(v); });
    return make_result(x.shape(), std::move(values), {x}, "exp",
                       [](const Tensor& g, const Tensor& self) {
                           return std::vector<Tensor>{mul(g, self)};
                       });
}

Tensor log(const Tensor& x) {
    auto values = unary_values(x, [](float v) { return std::log(v); });
    return make_result(x.shape(), std::move(values), {x}, "log",
                       [x](const Tensor& g, const Tensor&) { return std::vector<Tensor>{div(g, x)}; });
}

Tensor sqrt(const Tensor& x) {
    auto values = unary_values(x, [](float v) { return std::sqrt(v); });
    return make_result(x.shape(), std::move(values), {x}, "sqrt",
                       [](const Tensor& g, const Tensor& self) {
                           return std::vector<Tensor>{div(mul(g, 0.5f), self)};
                       });
}

Tensor square(const Tensor& x) {
    auto values = unary_values(x, [](float v) { return v * v; });
    return make_result(x.shape(), std::move(values), {x}, "square",
                       [x](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{mul(g, mul(x, 2.0f))};
                       });
}

Tensor clamp(const Tensor& x, float lo, float hi) {
    auto values = unary_values(x, [lo, hi](float v) { return std::clamp(v, lo, hi); });
    return make_result(x.shape(), std::move(values), {x}, "clamp",
                       [x, lo, hi](const Tensor& g, const Tensor&) {
                           auto mask = unary_values(
                               x, [lo, hi](float v) { return (v >= lo && v <= hi) ? 1.0f : 0.0f; });
                           return std::vector<Tensor>{mul(g, constant_like(x, std::move(mask)))};
                       });
}

Tensor sigmoid(const Tensor& x) {
    auto values = unary_values(x, [](float v) {
        // Split on sign so exp never overflows.
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
    });
    return make_result(x.shape(), std::move(values), {x}, "sigmoid",
                       [](const Tensor& g, const Tensor& self) {
                           return std::vector<Tensor>{mul(g, mul(self, add(neg(self), 1.0f)))};
                       });
}

Tensor tanh(const Tensor& x) {
    auto values = unary_values(x, [](float v) { return std::tanh(v); });
    return make_result(x.shape(), std::move(values), {x}, "tanh",
                       [](const Tensor& g, const Tensor& self) {
                           return std::vector<Tensor>{mul(g, add(neg(square(self)), 1.0f))};
                       });
}

Tensor leaky_relu(const Tensor& x, float slope) {
    auto values = unary_values(x, [slope](float v) { return v > 0.0f ? v : slope * v; });
    return make_result(x.shape(), std::move(values), {x}, "leaky_relu",
                       [x, slope](const Tensor& g, const Tensor&) {
                           auto mask = unary_values(x, [slope](float v) { return v > 0.0f ? 1.0f : slope; });
                           return std::vector<Tensor>{mul(g, constant_like(x, std::move(mask)))};
                       });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0f); }

Tensor activation(const Activation& act, const Tensor& x) {
    detail::check_finite(x.data(), "activation input");
    switch (act.kind) {
        case ActivationKind::identity:
            return x;
        case ActivationKind::sigmoid:
            return sigmoid(x);
        case ActivationKind::tanh:
            return tanh(x);
        case ActivationKind::relu:
            return relu(x);
        case ActivationKind::leaky_relu:
            if (!(act.slope > 0.0f && act.slope < 1.0f)) {
                throw std::invalid_argument("leaky_relu slope must lie in (0, 1)");
            }
            return leaky_relu(x, act.slope);
    }
    throw std::invalid_argument("unknown activation");
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
    if (x.shape() == shape) return x;
    if (broadcast_shapes(shape, x.shape()) != x.shape()) {
        throw ShapeError("sum_to: " + to_string(x.shape()) + " does not broadcast from " +
                         to_string(shape));
    }
    // Output strides expressed on x's rank.
    const auto strides = broadcast_strides(shape, x.shape());
    std::vector<double> acc(numel(shape), 0.0);
    auto d = x.data();
    for_each_broadcast(x.shape(), strides, [&](std::size_t i, std::size_t o) { acc[o] += d[i]; });
    std::vector<float> values(acc.begin(), acc.end());
    return make_result(shape, std::move(values), {x}, "sum_to",
                       [xs = x.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{expand(g, xs)};
                       });
}

Tensor expand(const Tensor& x, const Shape& shape) {
    if (x.shape() == shape) return x;
    if (broadcast_shapes(x.shape(), shape) != shape) {
        throw ShapeError("expand: cannot expand " + to_string(x.shape()) + " to " + to_string(shape));
    }
    const auto strides = broadcast_strides(x.shape(), shape);
    std::vector<float> values(numel(shape));
    auto d = x.data();
    for_each_broadcast(shape, strides, [&](std::size_t i, std::size_t o) { values[i] = d[o]; });
    return make_result(shape, std::move(values), {x}, "expand",
                       [xs = x.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{sum_to(g, xs)};
                       });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    return make_result(Shape{}, {static_cast<float>(acc)}, {x}, "sum",
                       [xs = x.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{expand(reshape(g, Shape(xs.size(), 1)), xs)};
                       });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ShapeError("mean of empty tensor");
    return mul(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
    Shape kept = x.shape();
    for (auto a : axes) {
        if (a >= kept.size()) throw ShapeError("sum: axis out of range");
        kept[a] = 1;
    }
    Tensor reduced = sum_to(x, kept);
    if (keepdim) return reduced;
    Shape squeezed;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (std::find(axes.begin(), axes.end(), i) == axes.end()) squeezed.push_back(kept[i]);
    }
    return reshape(reduced, squeezed);
}

Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
    std::size_t count = 1;
    for (auto a : axes) count *= x.dim(a);
    if (count == 0) throw ShapeError("mean over empty axes");
    return mul(sum(x, axes, keepdim), 1.0f / static_cast<float>(count));
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
    }
    if (shape == x.shape()) return x;
    auto values = x.to_vector();
    return make_result(std::move(shape), std::move(values), {x}, "reshape",
                       [xs = x.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{reshape(g, xs)};
                       });
}

Tensor flatten(const Tensor& x) {
    if (x.ndim() < 1) throw ShapeError("flatten of a scalar");
    return reshape(x, Shape{x.dim(0), x.numel() / std::max<std::size_t>(x.dim(0), 1)});
}

Tensor transpose(const Tensor& x) {
    require_rank(x, 2, "transpose");
    const std::size_t r = x.dim(0), c = x.dim(1);
    auto d = x.data();
    std::vector<float> values(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) values[j * r + i] = d[i * c + j];
    return make_result(Shape{c, r}, std::move(values), {x}, "transpose",
                       [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{transpose(g)}; });
}

namespace detail {

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
    using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k);
    Eigen::Map<RowMajor> cm(c, M, N);
    if (k == 0) {
        if (!accumulate) cm.setZero();
        return;
    }
    const Eigen::Map<const RowMajor> am(a, M, K), bm(b, K, N);
    if (accumulate) {
        cm.noalias() += am * bm;
    } else {
        cm.noalias() = am * bm;
    }
}

}  // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<float> values(m * n);
    detail::gemm(m, n, k, a.data().data(), b.data().data(), values.data(), false);
    return make_result(Shape{m, n}, std::move(values), {a, b}, "matmul",
                       [a, b](const Tensor& g, const Tensor&) {
                           Tensor ga, gb;
                           if (a.requires_grad()) ga = matmul(g, transpose(b));
                           if (b.requires_grad()) gb = matmul(transpose(a), g);
                           return std::vector<Tensor>{ga, gb};
                       });
}

// ---------------------------------------------------------------------------
// Convolution family. conv2d, conv_transpose2d and the kernel gradient are the
// three partial derivatives of <y, conv(x, k)>, so each one's backward is built
// from the other two.

namespace {

struct ConvGeometry {
    std::size_t n, c, h, w;     // input
    std::size_t f, kh, kw;      // kernel
    std::size_t oh, ow;         // output
    std::size_t stride, pad;
};

// col: [C*kh*kw, oh*ow]
void im2col(const float* x, const ConvGeometry& g, float* col) {
    const std::size_t cols = g.oh * g.ow;
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                float* row = col + ((ci * g.kh + ki) * g.kw + kj) * cols;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    float* dst = row + oy * g.ow;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill(dst, dst + g.ow, 0.0f);
                        continue;
                    }
                    const float* src = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0f : src[ix];
                    }
                }
            }
        }
    }
}

void col2im(const float* col, const ConvGeometry& g, float* x) {
    const std::size_t cols = g.oh * g.ow;
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const float* row = col + ((ci * g.kh + ki) * g.kw + kj) * cols;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    float* dst = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const float* src = row + oy * g.ow;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                        if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

std::vector<float> transposed(const float* a, std::size_t rows, std::size_t cols) {
    std::vector<float> t(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
    return t;
}

ConvGeometry conv_geometry(const Shape& x, const Shape& k, std::size_t stride, std::size_t pad,
                           const char* op) {
    if (x.size() != 4 || k.size() != 4) {
        throw ShapeError(std::string(op) + ": expected 4-d input and kernel, got " + to_string(x) +
                         " and " + to_string(k));
    }
    if (stride == 0) throw ShapeError(std::string(op) + ": stride must be positive");
    if (x[1] != k[1]) {
        throw ShapeError(std::string(op) + ": channel mismatch " + to_string(x) + " vs kernel " +
                         to_string(k));
    }
    if (k[2] > x[2] + 2 * pad || k[3] > x[3] + 2 * pad) {
        throw ShapeError(std::string(op) + ": kernel " + to_string(k) + " larger than padded input " +
                         to_string(x));
    }
    ConvGeometry g{};
    g.n = x[0];
    g.c = x[1];
    g.h = x[2];
    g.w = x[3];
    g.f = k[0];
    g.kh = k[2];
    g.kw = k[3];
    g.stride = stride;
    g.pad = pad;
    g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
    g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
    return g;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t padding) {
    const ConvGeometry g = conv_geometry(x.shape(), k.shape(), stride, padding, "conv2d");
    const std::size_t ck = g.c * g.kh * g.kw;
    const std::size_t cols = g.oh * g.ow;
    std::vector<float> values(g.n * g.f * cols);
    std::vector<float> col(ck * cols);
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(x.data().data() + n * g.c * g.h * g.w, g, col.data());
        detail::gemm(g.f, cols, ck, k.data().data(), col.data(), values.data() + n * g.f * cols, false);
    }
    return make_result(Shape{g.n, g.f, g.oh, g.ow}, std::move(values), {x, k}, "conv2d",
                       [x, k, stride, padding](const Tensor& grad, const Tensor&) {
                           Tensor gx, gk;
                           if (x.requires_grad()) {
                               gx = detail::conv_transpose2d_sized(grad, k, stride, padding, x.dim(2),
                                                                   x.dim(3));
                           }
                           if (k.requires_grad()) {
                               gk = detail::conv2d_weight_grad(x, grad, k.shape(), stride, padding);
                           }
                           return std::vector<Tensor>{gx, gk};
                       });
}

namespace detail {

Tensor conv_transpose2d_sized(const Tensor& x, const Tensor& k, std::size_t stride,
                              std::size_t padding, std::size_t out_h, std::size_t out_w) {
    if (x.ndim() != 4 || k.ndim() != 4 || x.dim(1) != k.dim(0)) {
        throw ShapeError("conv_transpose2d: input " + to_string(x.shape()) + " incompatible with kernel " +
                         to_string(k.shape()));
    }
    // Geometry of the forward convolution this op is the adjoint of.
    const Shape out_shape{x.dim(0), k.dim(1), out_h, out_w};
    const ConvGeometry g = conv_geometry(out_shape, Shape{k.dim(0), k.dim(1), k.dim(2), k.dim(3)},
                                         stride, padding, "conv_transpose2d");
    if (g.oh != x.dim(2) || g.ow != x.dim(3)) {
        throw ShapeError("conv_transpose2d: output " + to_string(out_shape) + " inconsistent with input " +
                         to_string(x.shape()));
    }
    const std::size_t ck = g.c * g.kh * g.kw;
    const std::size_t cols = g.oh * g.ow;
    const auto kt = transposed(k.data().data(), g.f, ck);  // [CK, F]
    std::vector<float> values(numel(out_shape), 0.0f);
    std::vector<float> col(ck * cols);
    for (std::size_t n = 0; n < g.n; ++n) {
        detail::gemm(ck, cols, g.f, kt.data(), x.data().data() + n * g.f * cols, col.data(), false);
        col2im(col.data(), g, values.data() + n * g.c * g.h * g.w);
    }
    return make_result(out_shape, std::move(values), {x, k}, "conv_transpose2d",
                       [x, k, stride, padding](const Tensor& grad, const Tensor&) {
                           Tensor gx, gk;
                           if (x.requires_grad()) gx = conv2d(grad, k, stride, padding);
                           if (k.requires_grad()) gk = conv2d_weight_grad(grad, x, k.shape(), stride, padding);
                           return std::vector<Tensor>{gx, gk};
                       });
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, const Shape& kernel_shape,
                          std::size_t stride, std::size_t padding) {
    const ConvGeometry g = conv_geometry(x.shape(), kernel_shape, stride, padding, "conv2d_weight_grad");
    if (grad_out.shape() != Shape{g.n, g.f, g.oh, g.ow}) {
        throw ShapeError("conv2d_weight_grad: gradient shape " + to_string(grad_out.shape()));
    }
    const std::size_t ck = g.c * g.kh * g.kw;
    const std::size_t cols = g.oh * g.ow;
    std::vector<float> values(g.f * ck, 0.0f);
    std::vector<float> col(ck * cols);
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(x.data().data() + n * g.c * g.h * g.w, g, col.data());
        const auto colt = transposed(col.data(), ck, cols);  // [cols, CK]
        detail::gemm(g.f, ck, cols, grad_out.data().data() + n * g.f * cols, colt.data(), values.data(), true);
    }
    return make_result(kernel_shape, std::move(values), {x, grad_out}, "conv2d_weight_grad",
                       [x, grad_out, stride, padding](const Tensor& gk, const Tensor&) {
                           Tensor gx, gy;
                           if (x.requires_grad()) {
                               gx = conv_transpose2d_sized(grad_out, gk, stride, padding, x.dim(2), x.dim(3));
                           }
                           if (grad_out.requires_grad()) gy = conv2d(x, gk, stride, padding);
                           return std::vector<Tensor>{gx, gy};
                       });
}

}  // namespace detail

Tensor conv_transpose2d(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t padding,
                        std::size_t output_padding) {
    require_rank(x, 4, "conv_transpose2d");
    require_rank(k, 4, "conv_transpose2d");
    if (stride == 0) throw ShapeError("conv_transpose2d: stride must be positive");
    const long oh = static_cast<long>((x.dim(2) - 1) * stride + k.dim(2) + output_padding) -
                    2 * static_cast<long>(padding);
    const long ow = static_cast<long>((x.dim(3) - 1) * stride + k.dim(3) + output_padding) -
                    2 * static_cast<long>(padding);
    if (oh <= 0 || ow <= 0) throw ShapeError("conv_transpose2d: non-positive output size");
    return detail::conv_transpose2d_sized(x, k, stride, padding, static_cast<std::size_t>(oh),
                                          static_cast<std::size_t>(ow));
}

// ---------------------------------------------------------------------------
// Pooling and resampling.

namespace {

struct PoolGeometry {
    std::size_t n, c, h, w, oh, ow;
};

PoolGeometry pool_geometry(const Shape& x, std::size_t window, std::size_t stride, const char* op) {
    if (x.size() != 4) throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + to_string(x));
    if (window == 0 || stride == 0) throw ShapeError(std::string(op) + ": window and stride must be positive");
    if (window > x[2] || window > x[3]) {
        throw ShapeError(std::string(op) + ": window " + std::to_string(window) + " larger than input " +
                         to_string(x));
    }
    return {x[0], x[1], x[2], x[3], (x[2] - window) / stride + 1, (x[3] - window) / stride + 1};
}

}  // namespace

Tensor avg_pool2d(const Tensor& x, std::size_t window, std::size_t stride) {
    const PoolGeometry g = pool_geometry(x.shape(), window, stride, "avg_pool2d");
    std::vector<float> values(g.n * g.c * g.oh * g.ow);
    auto d = x.data();
    const double inv = 1.0 / static_cast<double>(window * window);
    for (std::size_t p = 0; p < g.n * g.c; ++p) {
        const float* plane = d.data() + p * g.h * g.w;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                double acc = 0.0;
                for (std::size_t i = 0; i < window; ++i)
                    for (std::size_t j = 0; j < window; ++j)
                        acc += plane[(oy * stride + i) * g.w + ox * stride + j];
                values[(p * g.oh + oy) * g.ow + ox] = static_cast<float>(acc * inv);
            }
        }
    }
    return make_result(Shape{g.n, g.c, g.oh, g.ow}, std::move(values), {x}, "avg_pool2d",
                       [window, stride, h = g.h, w = g.w](const Tensor& grad, const Tensor&) {
                           return std::vector<Tensor>{detail::avg_pool2d_adjoint(grad, window, stride, h, w)};
                       });
}

namespace detail {

Tensor avg_pool2d_adjoint(const Tensor& grad, std::size_t window, std::size_t stride, std::size_t in_h,
                          std::size_t in_w) {
    require_rank(grad, 4, "avg_pool2d_adjoint");
    const Shape in_shape{grad.dim(0), grad.dim(1), in_h, in_w};
    const PoolGeometry g = pool_geometry(in_shape, window, stride, "avg_pool2d_adjoint");
    if (g.oh != grad.dim(2) || g.ow != grad.dim(3)) throw ShapeError("avg_pool2d_adjoint: size mismatch");
    std::vector<float> values(numel(in_shape), 0.0f);
    auto d = grad.data();
    const float inv = 1.0f / static_cast<float>(window * window);
    for (std::size_t p = 0; p < g.n * g.c; ++p) {
        float* plane = values.data() + p * in_h * in_w;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const float v = d[(p * g.oh + oy) * g.ow + ox] * inv;
                for (std::size_t i = 0; i < window; ++i)
                    for (std::size_t j = 0; j < window; ++j) plane[(oy * stride + i) * in_w + ox * stride + j] += v;
            }
        }
    }
    return make_result(in_shape, std::move(values), {grad}, "avg_pool2d_adjoint",
                       [window, stride](const Tensor& gg, const Tensor&) {
                           return std::vector<Tensor>{avg_pool2d(gg, window, stride)};
                       });
}

}  // namespace detail

Tensor max_pool2d(const Tensor& x, std::size_t window, std::size_t stride) {
    const PoolGeometry g = pool_geometry(x.shape(), window, stride, "max_pool2d");
    std::vector<std::int64_t> index(g.n * g.c * g.oh * g.ow);
    auto d = x.data();
    for (std::size_t p = 0; p < g.n * g.c; ++p) {
        const std::size_t base = p * g.h * g.w;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                std::size_t best = base + oy * stride * g.w + ox * stride;
                for (std::size_t i = 0; i < window; ++i) {
                    for (std::size_t j = 0; j < window; ++j) {
                        const std::size_t at = base + (oy * stride + i) * g.w + ox * stride + j;
                        if (d[at] > d[best]) best = at;
                    }
                }
                index[(p * g.oh + oy) * g.ow + ox] = static_cast<std::int64_t>(best);
            }
        }
    }
    return gather(x, make_index(std::move(index)), Shape{g.n, g.c, g.oh, g.ow});
}

Tensor pool(PoolKind kind, const Tensor& x, std::size_t window, std::size_t stride) {
    return kind == PoolKind::max ? max_pool2d(x, window, stride) : avg_pool2d(x, window, stride);
}

Tensor upsample_nearest2x(const Tensor& x) {
    require_rank(x, 4, "upsample_nearest2x");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<std::int64_t> index(n * c * 4 * h * w);
    std::size_t o = 0;
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx)
                index[o++] = static_cast<std::int64_t>(p * h * w + (y / 2) * w + xx / 2);
    return gather(x, make_index(std::move(index)), Shape{n, c, 2 * h, 2 * w});
}

// ---------------------------------------------------------------------------
// Index-driven data movement.

Tensor gather(const Tensor& x, IndexMap index, Shape out_shape) {
    if (index->size() != numel(out_shape)) throw ShapeError("gather: index size mismatch");
    auto d = x.data();
    std::vector<float> values(index->size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto at = (*index)[i];
        if (at >= static_cast<std::int64_t>(d.size())) throw ShapeError("gather: index out of range");
        values[i] = at < 0 ? 0.0f : d[static_cast<std::size_t>(at)];
    }
    return make_result(std::move(out_shape), std::move(values), {x}, "gather",
                       [index, xs = x.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{scatter_add(g, index, xs)};
                       });
}

Tensor scatter_add(const Tensor& x, IndexMap index, Shape out_shape) {
    if (index->size() != x.numel()) throw ShapeError("scatter_add: index size mismatch");
    std::vector<float> values(numel(out_shape), 0.0f);
    auto d = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto at = (*index)[i];
        if (at < 0) continue;
        if (at >= static_cast<std::int64_t>(values.size())) throw ShapeError("scatter_add: index out of range");
        values[static_cast<std::size_t>(at)] += d[i];
    }
    return make_result(std::move(out_shape), std::move(values), {x}, "scatter_add",
                       [index, xs = x.shape()](const Tensor& g, const Tensor&) {
                           return std::vector<Tensor>{gather(g, index, xs)};
                       });
}

Tensor index_select(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& indices) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw ShapeError("index_select: axis out of range");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    Shape out = s;
    out[axis] = indices.size();
    std::vector<std::int64_t> index;
    index.reserve(numel(out));
    for (std::size_t o = 0; o < outer; ++o) {
        for (auto sel : indices) {
            if (sel >= s[axis]) throw ShapeError("index_select: index out of range");
            for (std::size_t i = 0; i < inner; ++i)
                index.push_back(static_cast<std::int64_t>((o * s[axis] + sel) * inner + i));
        }
    }
    return gather(x, make_index(std::move(index)), out);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of nothing");
    Shape out = parts.front().shape();
    if (axis >= out.size()) throw ShapeError("concat: axis out of range");
    out[axis] = 0;
    for (const auto& p : parts) {
        Shape s = p.shape();
        if (s.size() != out.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i != axis && s[i] != out[i]) throw ShapeError("concat: shape mismatch");
        }
        out[axis] += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= out[i];
    for (std::size_t i = axis + 1; i < out.size(); ++i) inner *= out[i];
    Tensor result;
    std::size_t start = 0;
    for (const auto& p : parts) {
        const std::size_t len = p.dim(axis);
        std::vector<std::int64_t> index;
        index.reserve(p.numel());
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t a = 0; a < len; ++a)
                for (std::size_t i = 0; i < inner; ++i)
                    index.push_back(static_cast<std::int64_t>((o * out[axis] + start + a) * inner + i));
        Tensor placed = scatter_add(p, make_index(std::move(index)), out);
        result = result.defined() ? add(result, placed) : placed;
        start += len;
    }
    return result;
}

}  // namespace albumgan
