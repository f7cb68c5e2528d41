#include <doctest.h>

#include <cmath>
#include <limits>
#include <unordered_set>

#include "albumgan/adam.hpp"
#include "albumgan/autograd.hpp"
#include "albumgan/loss.hpp"
#include "albumgan/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/op_cases.hpp"
#include "support/reference.hpp"

using namespace albumgan;

namespace {

Tensor param(Shape shape, std::vector<float> values) {
    Tensor t = Tensor::from(std::move(shape), std::move(values));
    t.set_requires_grad();
    return t;
}

Tensor random_tensor(Shape shape, Rng& rng) {
    const auto n = numel(shape);
    return Tensor::from(std::move(shape), rng.normal_vector(n));
}

}  // namespace

TEST_SUITE("tensor") {
    TEST_CASE("activation examples") {
        CHECK(sigmoid(Tensor::scalar(0.0f)).item() == doctest::Approx(0.5));
        CHECK(tanh(Tensor::scalar(0.0f)).item() == 0.0f);
        CHECK(activation(Activation::leaky_relu(0.2f), Tensor::scalar(-1.0f)).item() == doctest::Approx(-0.2));
        CHECK(relu(Tensor::from({2}, {-3.0f, 2.0f})).to_vector() == std::vector<float>{0.0f, 2.0f});
    }

    TEST_CASE("activation rejects bad slopes and non-finite input") {
        CHECK_THROWS_AS(activation(Activation::leaky_relu(0.0f), Tensor::scalar(1.0f)), std::invalid_argument);
        CHECK_THROWS_AS(activation(Activation::leaky_relu(1.0f), Tensor::scalar(1.0f)), std::invalid_argument);
        const float inf = std::numeric_limits<float>::infinity();
        CHECK_THROWS_AS(activation(Activation::sigmoid(), Tensor::from({1}, {inf})), NonFiniteError);
        CHECK_THROWS_AS(activation(Activation::tanh(), Tensor::from({1}, {std::nanf("")})), NonFiniteError);
    }

    TEST_CASE("loss examples") {
        const Tensor a = Tensor::from({2}, {1, 2});
        CHECK(mse_loss(a, a).item() == 0.0f);
        CHECK(bce_loss(Tensor::scalar(0.5f), Tensor::scalar(1.0f)).item() == doctest::Approx(0.693147).epsilon(1e-6));
        // A critic gradient of norm exactly 1 per sample gives no penalty.
        const Tensor unit = Tensor::from({2, 2}, {0.6f, 0.8f, 1.0f, 0.0f});
        CHECK(gradient_penalty(unit).item() == doctest::Approx(0.0).epsilon(1e-6));
        const Tensor fake = Tensor::from({2}, {0.5f, 1.5f}), real = Tensor::from({2}, {2.0f, 3.0f});
        PenaltyInputs aux{unit, 10.0f};
        CHECK(loss(LossKind::wgan_gp, fake, real, &aux).item() == doctest::Approx(-1.5));
    }

    TEST_CASE("loss errors") {
        CHECK_THROWS_AS(mse_loss(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
        CHECK_THROWS_AS(bce_loss(Tensor::full({1}, 0.5f), Tensor::full({1}, 1.5f)), std::invalid_argument);
        CHECK_THROWS_AS(bce_loss(Tensor::full({1}, 0.5f), Tensor::full({1}, -0.1f)), std::invalid_argument);
        CHECK_THROWS(loss(LossKind::wgan_gp, Tensor::zeros({1}), Tensor::zeros({1})));
    }

    TEST_CASE("bce clamps saturated predictions") {
        const float v = bce_loss(Tensor::from({2}, {0.0f, 1.0f}), Tensor::from({2}, {1.0f, 0.0f})).item();
        CHECK(std::isfinite(v));
        // Both terms hit the clamp; 1 - 1e-7 rounds to 1 - 2^-23 in float.
        const double expected = -0.5 * (std::log(1e-7f) + std::log(1.0 - static_cast<double>(1.0f - 1e-7f)));
        CHECK(v == doctest::Approx(expected).epsilon(1e-5));
    }

    TEST_CASE("losses are non-negative on valid inputs") {
        Rng rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 1 + trial % 5, k = 2 + trial % 3;
            std::vector<float> p(n * k), y(n * k, 0.0f), t(n * k);
            for (auto& v : p) v = rng.uniform(0.0f, 1.0f);
            for (auto& v : t) v = rng.uniform(0.0f, 1.0f);
            for (std::size_t i = 0; i < n; ++i) y[i * k + static_cast<std::size_t>(rng.integer(0, k - 1))] = 1.0f;
            const Tensor pred = Tensor::from({n, k}, p);
            CHECK(mse_loss(pred, Tensor::from({n, k}, t)).item() >= 0.0f);
            CHECK(bce_loss(pred, Tensor::from({n, k}, t)).item() >= 0.0f);
            CHECK(cce_loss(pred, Tensor::from({n, k}, y)).item() >= 0.0f);
        }
    }

    TEST_CASE("conv2d examples") {
        Rng rng(1);
        const Tensor x = random_tensor({1, 1, 5, 5}, rng);
        CHECK(conv2d(x, Tensor::ones({1, 1, 1, 1}), 1, 0).to_vector() == x.to_vector());

        const Tensor y = conv2d(Tensor::ones({1, 1, 4, 4}), Tensor::ones({1, 1, 3, 3}), 1, 0);
        CHECK(y.shape() == Shape{1, 1, 2, 2});
        for (float v : y.data()) CHECK(v == 9.0f);

        CHECK(conv2d(Tensor::zeros({1, 1, 28, 28}), Tensor::zeros({1, 1, 5, 5}), 2, 2).shape() == Shape{1, 1, 14, 14});
    }

    TEST_CASE("conv2d shape errors") {
        CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), 1, 0), ShapeError);
        CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), 1, 0), ShapeError);
        CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 3, 3}), 1, 0), ShapeError);
        CHECK_THROWS_AS(conv_transpose2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({3, 1, 3, 3}), 1, 0), ShapeError);
    }

    TEST_CASE("conv_transpose2d examples") {
        Rng rng(2);
        const Tensor x = random_tensor({2, 1, 3, 3}, rng);
        CHECK(conv_transpose2d(x, Tensor::ones({1, 1, 1, 1}), 1, 0).to_vector() == x.to_vector());
        CHECK(conv_transpose2d(Tensor::zeros({1, 1, 7, 7}), Tensor::zeros({1, 1, 4, 4}), 2, 1).shape() ==
              Shape{1, 1, 14, 14});
    }

    // The conv operator as an explicit matrix: column j is conv of basis vector e_j.
    TEST_CASE("conv_transpose2d and conv2d backward equal the transposed conv matrix") {
        Rng rng(3);
        for (int trial = 0; trial < 12; ++trial) {
            const std::size_t c = 1 + trial % 2, f = 1 + (trial / 2) % 2, h = 3 + trial % 4, k = 1 + trial % 3;
            const std::size_t stride = 1 + trial % 2, pad = trial % 2;
            const Tensor kernel = random_tensor({f, c, k, k}, rng);
            const std::size_t in_size = c * h * h;
            std::vector<std::vector<float>> columns;
            Shape out_shape;
            for (std::size_t j = 0; j < in_size; ++j) {
                std::vector<float> e(in_size, 0.0f);
                e[j] = 1.0f;
                const Tensor y = conv2d(Tensor::from({1, c, h, h}, e), kernel, stride, pad);
                out_shape = y.shape();
                columns.push_back(y.to_vector());
            }
            const std::size_t out_size = numel(out_shape);
            const Tensor r = random_tensor(out_shape, rng);

            std::vector<double> mt_r(in_size, 0.0);
            for (std::size_t j = 0; j < in_size; ++j)
                for (std::size_t i = 0; i < out_size; ++i) mt_r[j] += columns[j][i] * r.data()[i];

            const std::size_t op = h - ((out_shape[2] - 1) * stride + k - 2 * pad);
            Tensor adj = conv_transpose2d(r, kernel, stride, pad, op);
            REQUIRE(adj.shape() == Shape{1, c, h, h});

            Tensor x = param({1, c, h, h}, std::vector<float>(in_size, 0.5f));
            backward(sum(mul(conv2d(x, kernel, stride, pad), r)));
            const auto gx = x.grad()->to_vector();
            for (std::size_t j = 0; j < in_size; ++j) {
                CHECK(adj.data()[j] == doctest::Approx(mt_r[j]).epsilon(1e-5).scale(1.0));
                CHECK(gx[j] == doctest::Approx(mt_r[j]).epsilon(1e-5).scale(1.0));
            }
        }
    }

    TEST_CASE("pool examples") {
        const Tensor c = Tensor::full({1, 1, 4, 4}, 3.5f);
        const Tensor pooled = max_pool2d(c, 2, 2);
        for (float v : pooled.data()) CHECK(v == 3.5f);
        CHECK(avg_pool2d(Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2).item() == 2.5f);
        const Tensor grid = Tensor::from({1, 1, 4, 4}, {1, 5, 2, 0, 3, 4, 8, 7, 9, 0, 1, 1, 2, 6, 1, 3});
        CHECK(pool(PoolKind::max, grid, 2, 2).to_vector() == std::vector<float>{5, 8, 9, 3});
        CHECK_THROWS_AS(pool(PoolKind::max, Tensor::zeros({1, 1, 2, 2}), 3, 1), ShapeError);
    }

    TEST_CASE("max pool gradient routes to the region maximum") {
        Tensor x = param({1, 1, 2, 2}, {1, 7, 3, 4});
        backward(sum(max_pool2d(x, 2, 2)));
        CHECK(x.grad()->to_vector() == std::vector<float>{0, 1, 0, 0});
    }

    TEST_CASE("backward examples") {
        Tensor x = param({3}, {1, -2, 4});
        backward(sum(x));
        CHECK(x.grad()->to_vector() == std::vector<float>{1, 1, 1});

        Tensor y = param({2}, {1, 2});
        Tensor d = y.detach();
        Tensor z = param({2}, {3, 4});
        backward(sum(mul(d, z)));
        CHECK_FALSE(d.grad().has_value());
        CHECK_FALSE(y.grad().has_value());
        CHECK(z.grad()->to_vector() == std::vector<float>{1, 2});
    }

    TEST_CASE("backward errors") {
        Tensor x = param({2}, {1, 2});
        CHECK_THROWS_AS(backward(mul(x, 2.0f)), ShapeError);
        CHECK_THROWS(backward(sum(Tensor::ones({2}))));
    }

    TEST_CASE("gradients accumulate across backward calls") {
        Tensor x = param({2}, {1, 2});
        backward(sum(x));
        backward(sum(mul(x, 3.0f)));
        CHECK(x.grad()->to_vector() == std::vector<float>{4, 4});
        x.zero_grad();
        CHECK_FALSE(x.grad().has_value());
    }

    TEST_CASE("no-grad guard stops recording") {
        Tensor x = param({2}, {1, 2});
        NoGradGuard guard;
        CHECK_FALSE(mul(x, 2.0f).requires_grad());
    }

    TEST_CASE("mse through a dense layer matches finite differences") {
        Rng rng(4);
        for (int trial = 0; trial < 20; ++trial) {
            gradcheck::Problem p;
            const std::size_t n = 1 + trial % 3, in = 2 + trial % 4, out = 1 + trial % 3;
            p.shapes = {{n, in}, {in, out}, {out}, {n, out}};
            p.values = {gradcheck::random_values(rng, n * in, -1, 1), gradcheck::random_values(rng, in * out, -1, 1),
                        gradcheck::random_values(rng, out, -1, 1), gradcheck::random_values(rng, n * out, -1, 1)};
            p.differentiable = {true, true, true, false};
            p.engine = [](const std::vector<Tensor>& v) {
                return reshape(mse_loss(add(matmul(v[0], v[1]), v[2]), v[3]), {1});
            };
            p.reference = [n, in, out](const std::vector<gradcheck::Vec>& v) {
                auto y = ref::matmul(v[0], v[1], n, in, out);
                double acc = 0;
                for (std::size_t i = 0; i < n * out; ++i) acc += std::pow(y[i] + v[2][i % out] - v[3][i], 2);
                return gradcheck::Vec{acc / static_cast<double>(n * out)};
            };
            const auto report = gradcheck::check(p, rng);
            CHECK_MESSAGE(report.ok(), report.detail);
        }
    }

    TEST_CASE("every differentiable op matches finite differences") {
        for (const auto& op : gradcheck::core_op_cases()) {
            Rng rng(1000);
            for (int trial = 0; trial < 20; ++trial) {
                const auto report = gradcheck::check(op.make(rng), rng);
                INFO(op.name, " trial ", trial, ": ", report.detail);
                CHECK(report.forward_error <= 1.0);
                CHECK(report.worst_ratio <= 1.0);
            }
        }
    }

    TEST_CASE("tape is in topological order") {
        Tensor a = param({2}, {1, 2});
        Tensor b = param({2}, {3, 4});
        Tensor c = mul(a, b);
        Tensor d = add(c, a);
        Tensor e = sum(mul(d, c));
        const Tape tape = Tape::record(e);
        std::unordered_set<const TensorImpl*> seen;
        for (const auto& node : tape.nodes()) {
            for (const auto& parent : node->parents)
                if (parent->requires_grad) CHECK(seen.count(parent.get()) == 1);
            seen.insert(node.get());
        }
        CHECK(tape.nodes().back().get() == e.impl());
        CHECK(tape.size() == 6);
    }

    TEST_CASE("replay with the same seed is bit-identical") {
        auto run = [] {
            Rng rng(77);
            Tensor x = random_tensor({2, 2, 6, 6}, rng);
            Tensor k = random_tensor({3, 2, 3, 3}, rng);
            k.set_requires_grad();
            Tensor y = leaky_relu(conv2d(x, k, 2, 1), 0.2f);
            backward(mean(square(y)));
            auto out = y.to_vector();
            auto g = k.grad()->to_vector();
            out.insert(out.end(), g.begin(), g.end());
            return out;
        };
        CHECK(run() == run());
    }

    TEST_CASE("adam first step moves by lr times the gradient sign") {
        for (float g : {0.3f, -4.0f, 1e-3f}) {
            AdamConfig config{0.01f, 0.9f, 0.999f, 0.0f};
            auto state = AdamState::for_size(1, config);
            std::vector<float> p{1.0f};
            std::vector<float> grad{g};
            adam_step(p, grad, state);
            CHECK(p[0] == doctest::Approx(1.0f - 0.01f * (g > 0 ? 1.0f : -1.0f)).epsilon(1e-6));
            CHECK(state.t == 1);
        }
    }

    TEST_CASE("adam leaves parameters alone under zero gradient") {
        auto state = AdamState::for_size(3, AdamConfig{});
        std::vector<float> p{1, -2, 3}, g{0, 0, 0};
        adam_step(p, g, state);
        CHECK(p == std::vector<float>{1, -2, 3});
    }

    TEST_CASE("adam shrinks w on f(w) = w^2") {
        Tensor w = param({1}, {2.0f});
        Adam opt({w}, AdamConfig{0.1f, 0.9f, 0.999f, 1e-8f});
        float previous = std::abs(w.item());
        for (int i = 0; i < 10; ++i) {
            opt.zero_grad();
            backward(sum(square(w)));
            opt.step();
            CHECK(std::abs(w.item()) < previous);
            previous = std::abs(w.item());
        }
        CHECK(opt.states()[0].t == 10);
    }

    TEST_CASE("adam rejects non-finite gradients and mismatched sizes") {
        auto state = AdamState::for_size(1, AdamConfig{});
        std::vector<float> p{1}, g{std::numeric_limits<float>::infinity()}, two{1, 2};
        CHECK_THROWS_AS(adam_step(p, g, state), NonFiniteError);
        CHECK_THROWS(adam_step(p, two, state));
    }

    TEST_CASE("broadcasting follows trailing-axis rules") {
        CHECK(broadcast_shapes({2, 1, 4}, {3, 1}) == Shape{2, 3, 4});
        CHECK_THROWS_AS(broadcast_shapes({2, 3}, {4}), ShapeError);
        CHECK(add(Tensor::from({2, 1}, {1, 2}), Tensor::from({3}, {10, 20, 30})).to_vector() ==
              std::vector<float>{11, 21, 31, 12, 22, 32});
    }

    TEST_CASE("ops reject non-finite results") {
        CHECK_THROWS_AS(exp(Tensor::scalar(200.0f)), NonFiniteError);
        CHECK_THROWS_AS(div(Tensor::scalar(1.0f), Tensor::scalar(0.0f)), NonFiniteError);
    }
}
