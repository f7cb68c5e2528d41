#include "albumgan/adam.hpp"

#include <cmath>

namespace albumgan {

AdamState AdamState::for_size(std::size_t n, const AdamConfig& config) {
    AdamState s;
    s.m.assign(n, 0.0f);
    s.v.assign(n, 0.0f);
    s.lr = config.lr;
    s.beta1 = config.beta1;
    s.beta2 = config.beta2;
    s.eps = config.eps;
    return s;
}

void adam_step(std::span<float> param, std::span<const float> grad, AdamState& state) {
    if (param.size() != grad.size() || state.m.size() != param.size() || state.v.size() != param.size()) {
        throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
    }
    detail::check_finite(grad, "adam_step gradient");
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(static_cast<double>(state.beta1), t);
    const double correction2 = 1.0 - std::pow(static_cast<double>(state.beta2), t);
    const float b1 = state.beta1, b2 = state.beta2;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const float g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0f - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0f - b2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        param[i] -= static_cast<float>(state.lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    states_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.is_leaf()) throw std::invalid_argument("Adam: parameters must be leaf tensors");
        states_.push_back(AdamState::for_size(p.numel(), config_));
    }
}

void Adam::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto g = params_[i].grad();
        if (!g) continue;
        adam_step(params_[i].mutable_data(), g->data(), states_[i]);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::set_lr(float lr) {
    config_.lr = lr;
    for (auto& s : states_) s.lr = lr;
}

}  // namespace albumgan
