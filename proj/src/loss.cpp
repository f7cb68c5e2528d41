#include "albumgan/loss.hpp"

#include "albumgan/ops.hpp"

#include <cmath>

namespace albumgan {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": prediction " + to_string(a.shape()) + " vs target " +
                         to_string(b.shape()));
    }
}

}  // namespace

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    return mean(square(sub(pred, target)));
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "bce");
    for (float t : target.data()) {
        if (!(t >= 0.0f && t <= 1.0f)) throw std::invalid_argument("bce: target outside [0, 1]");
    }
    Tensor p = clamp(pred, kProbabilityEpsilon, 1.0f - kProbabilityEpsilon);
    auto pd = p.data();
    auto yd = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < pd.size(); ++i) {
        const double pi = pd[i], yi = yd[i];
        acc -= yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
    }
    const float inv_n = 1.0f / static_cast<float>(pd.size());
    // d/dp = (p - y) / (p (1 - p)); written this way to avoid cancelling y/p against (1-y)/(1-p).
    return detail::make_result(
        {}, {static_cast<float>(acc / static_cast<double>(pd.size()))}, {p, target}, "bce",
        [inv_n](const Tensor& g, const Tensor& self) {
            const Tensor p = Tensor(self.impl()->parents[0]);
            const Tensor y = Tensor(self.impl()->parents[1]);
            const Tensor one_minus = add(neg(p), 1.0f);
            Tensor dp = mul(div(sub(p, y), mul(p, one_minus)), mul(g, inv_n));
            Tensor dy = mul(sub(log(one_minus), log(p)), mul(g, inv_n));
            return std::vector<Tensor>{dp, dy};
        });
}

Tensor cce_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "cce");
    if (pred.ndim() != 2) throw ShapeError("cce: expected [N, classes]");
    Tensor p = clamp(pred, kProbabilityEpsilon, 1.0f - kProbabilityEpsilon);
    Tensor per_sample = sum(mul(target, log(p)), {1}, false);
    return neg(mean(per_sample));
}

Tensor gradient_penalty(const Tensor& interpolate_grads, float lambda) {
    Tensor flat = flatten(interpolate_grads);
    Tensor norms = sqrt(add(sum(square(flat), {1}, false), 1e-12f));
    return mul(mean(square(add(norms, -1.0f))), lambda);
}

Tensor wgan_gp_loss(const Tensor& critic_fake, const Tensor& critic_real, const Tensor& interpolate_grads,
                    float lambda) {
    Tensor critic = sub(mean(critic_fake), mean(critic_real));
    return add(critic, gradient_penalty(interpolate_grads, lambda));
}

Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target, const PenaltyInputs* aux) {
    switch (kind) {
        case LossKind::mse:
            return mse_loss(pred, target);
        case LossKind::bce:
            return bce_loss(pred, target);
        case LossKind::cce:
            return cce_loss(pred, target);
        case LossKind::wgan_gp:
            if (aux == nullptr || !aux->interpolate_grads.defined()) {
                throw std::invalid_argument("wgan_gp loss needs gradient-penalty inputs");
            }
            return wgan_gp_loss(pred, target, aux->interpolate_grads, aux->lambda);
    }
    throw std::invalid_argument("unknown loss kind");
}

}  // namespace albumgan
