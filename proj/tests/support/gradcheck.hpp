#pragma once

// Central finite-difference gradient checking against double-precision
// reference functions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "albumgan/autograd.hpp"
#include "albumgan/ops.hpp"
#include "albumgan/rng.hpp"

namespace gradcheck {

using albumgan::Shape;
using albumgan::Tensor;
using Vec = std::vector<double>;

struct Problem {
    std::vector<Shape> shapes;
    std::vector<Vec> values;
    // Which inputs are differentiated (default: all).
    std::vector<bool> differentiable;
    std::function<Tensor(const std::vector<Tensor>&)> engine;
    std::function<Vec(const std::vector<Vec>&)> reference;
};

struct OpCase {
    std::string name;
    std::function<Problem(albumgan::Rng&)> make;
};

struct Report {
    double worst_ratio = 0.0;  // max |analytic - fd| / tolerance; <= 1 passes
    double forward_error = 0.0;
    std::size_t checked = 0;
    std::string detail;
    bool ok() const { return worst_ratio <= 1.0 && forward_error <= 1.0; }
};

inline constexpr double kStep = 1e-3;
inline constexpr double kRelTol = 1e-4;
inline constexpr double kAbsTol = 1e-6;

inline double tolerance(double reference) { return std::max(kRelTol * std::abs(reference), kAbsTol); }

// Values are rounded through float so engine and reference see the same inputs.
inline Vec rounded(const Vec& v) {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

inline Report check(Problem p, albumgan::Rng& rng) {
    Report report;
    for (auto& v : p.values) v = rounded(v);
    if (p.differentiable.empty()) p.differentiable.assign(p.shapes.size(), true);

    std::vector<Tensor> inputs;
    for (std::size_t i = 0; i < p.shapes.size(); ++i) {
        std::vector<float> f(p.values[i].begin(), p.values[i].end());
        Tensor t = Tensor::from(p.shapes[i], std::move(f));
        if (p.differentiable[i]) t.set_requires_grad();
        inputs.push_back(t);
    }
    Tensor out = p.engine(inputs);
    const Vec ref_out = p.reference(p.values);
    if (ref_out.size() != out.numel()) {
        report.forward_error = 1e9;
        report.detail = "reference size mismatch";
        return report;
    }
    auto od = out.data();
    for (std::size_t i = 0; i < ref_out.size(); ++i) {
        const double tol = std::max(1e-4 * std::abs(ref_out[i]), 1e-5);
        report.forward_error = std::max(report.forward_error, std::abs(od[i] - ref_out[i]) / tol);
    }

    Vec weights(out.numel());
    for (auto& w : weights) w = static_cast<float>(rng.uniform(-1.0f, 1.0f));
    std::vector<float> wf(weights.begin(), weights.end());
    Tensor loss = albumgan::sum(albumgan::mul(out, Tensor::from(out.shape(), wf)));
    albumgan::backward(loss);

    auto objective = [&](const std::vector<Vec>& vals) {
        const Vec y = p.reference(vals);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
        return acc;
    };

    for (std::size_t in = 0; in < inputs.size(); ++in) {
        if (!p.differentiable[in]) continue;
        auto g = inputs[in].grad();
        std::vector<float> analytic = g ? g->to_vector() : std::vector<float>(inputs[in].numel(), 0.0f);
        for (std::size_t e = 0; e < p.values[in].size(); ++e) {
            auto plus = p.values;
            auto minus = p.values;
            plus[in][e] += kStep;
            minus[in][e] -= kStep;
            const double fd = (objective(plus) - objective(minus)) / (2.0 * kStep);
            const double ratio = std::abs(analytic[e] - fd) / tolerance(fd);
            if (ratio > report.worst_ratio) {
                report.worst_ratio = ratio;
                report.detail = "input " + std::to_string(in) + " element " + std::to_string(e) +
                                ": analytic " + std::to_string(analytic[e]) + " fd " + std::to_string(fd);
            }
            ++report.checked;
        }
    }
    return report;
}

// Helpers for building problems.

inline Vec random_values(albumgan::Rng& rng, std::size_t n, double lo, double hi) {
    Vec v(n);
    for (auto& x : v) x = rng.uniform(static_cast<float>(lo), static_cast<float>(hi));
    return v;
}

// Values bounded away from zero (for kinks at the origin).
inline Vec away_from_zero(albumgan::Rng& rng, std::size_t n, double margin, double hi) {
    Vec v(n);
    for (auto& x : v) {
        const double mag = rng.uniform(static_cast<float>(margin), static_cast<float>(hi));
        x = rng.bernoulli(0.5) ? mag : -mag;
    }
    return v;
}

// Distinct values with pairwise gaps well above the finite-difference step.
inline Vec distinct_values(albumgan::Rng& rng, std::size_t n) {
    auto perm = rng.permutation(n);
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 0.05 * static_cast<double>(perm[i]) - 0.025 * static_cast<double>(n);
    return v;
}

inline std::size_t pick(albumgan::Rng& rng, std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

}  // namespace gradcheck
