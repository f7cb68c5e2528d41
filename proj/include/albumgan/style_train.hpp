#pragma once

#include <filesystem>

#include "albumgan/ada.hpp"
#include "albumgan/style.hpp"
#include "albumgan/train.hpp"

namespace albumgan {

/// Drift term keeping critic scores near zero.
inline constexpr float kCriticDrift = 1e-3f;

struct StyleGan {
    StyleGenerator g;
    StyleDiscriminator d;

    StyleGan(const StyleConfig& config, Rng& rng) : g(config, rng), d(config, rng) {}
    std::vector<nn::NamedTensor> state() const;
    void load_state(const std::vector<nn::NamedTensor>& arrays);
};

/// Critic loss mean(D(fake)) - mean(D(real)) + gradient penalty + drift, with
/// both batches passed through the same augmentation pipeline at probability p.
/// Also returns the critic scores on reals for the rt estimate.
struct CriticStep {
    Tensor loss;
    Tensor real_scores;
};
CriticStep critic_loss(const StyleGan& gan, const Tensor& reals, const Tensor& fakes, const ProgressiveSchedule& schedule,
                       float p, float gp_lambda, Rng& rng, const AugmentConfig& augment_config = {});

/// WGAN-GP training with progressive growing and adaptive augmentation.
/// dataset is a normalized [N, C, R, R] tensor at full resolution. Output
/// layout matches train_conv_gan; loss.csv carries ada_p / ada_rt columns on
/// iterations where the controller adjusted p.
TrainOutputs train_style_gan(const TrainConfig& config, const Tensor& dataset, const std::filesystem::path& outdir,
                             const TrainHooks& hooks = {});

}  // namespace albumgan
