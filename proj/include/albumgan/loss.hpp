#pragma once

#include "albumgan/tensor.hpp"

namespace albumgan {

enum class LossKind { mse, bce, cce, wgan_gp };

/// Probability clamp applied before every log in bce/cce.
inline constexpr float kProbabilityEpsilon = 1e-7f;
inline constexpr float kDefaultPenaltyWeight = 10.0f;

Tensor mse_loss(const Tensor& pred, const Tensor& target);
// Targets must lie in [0, 1].
Tensor bce_loss(const Tensor& pred, const Tensor& target);
// pred and target are [N, classes]; rows of pred are probabilities.
Tensor cce_loss(const Tensor& pred, const Tensor& target);

/// lambda * mean((||g_i|| - 1)^2) over the per-sample gradients g_i of the
/// critic at interpolated points. `interpolate_grads` is [N, ...].
Tensor gradient_penalty(const Tensor& interpolate_grads, float lambda = kDefaultPenaltyWeight);

/// Critic loss mean(D(fake)) - mean(D(real)) plus the gradient penalty.
Tensor wgan_gp_loss(const Tensor& critic_fake, const Tensor& critic_real, const Tensor& interpolate_grads,
                    float lambda = kDefaultPenaltyWeight);

struct PenaltyInputs {
    Tensor interpolate_grads;
    float lambda = kDefaultPenaltyWeight;
};

/// Dispatch over the loss kinds. For wgan_gp, `pred` holds critic scores on
/// fakes, `target` critic scores on reals and `aux` the penalty inputs.
Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target, const PenaltyInputs* aux = nullptr);

}  // namespace albumgan
