#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "albumgan/rng.hpp"
#include "albumgan/tensor.hpp"

namespace albumgan {

struct AugmentConfig {
    bool hflip = true;
    bool rot90 = true;
    bool translate = true;
    bool brightness = true;
    bool saturation = true;
    // Fraction of the image side.
    float max_translate = 0.125f;
    float max_brightness = 0.2f;
    // Saturation scale is log-uniform in [1/max_saturation, max_saturation].
    float max_saturation = 2.0f;

    static AugmentConfig flip_only();
};

/// What augment() did to one image, in application order.
struct AugmentParams {
    bool flipped = false;
    int quarter_turns = 0;  // counter-clockwise, 0..3
    int shift_x = 0;        // circular, pixels
    int shift_y = 0;
    float brightness = 0.0f;
    float saturation = 1.0f;
};

/// Each enabled category is applied independently with probability p per
/// image. Differentiable with respect to `batch`. Requires square images when
/// rotation is enabled.
Tensor augment(const Tensor& batch, float p, Rng& rng, const AugmentConfig& config = {},
               std::vector<AugmentParams>* applied = nullptr);

/// Undoes augment() given its recorded parameters. Flips, rotations and
/// translations are exact; brightness and saturation are exact up to float
/// rounding (kAugmentInverseTolerance).
inline constexpr float kAugmentInverseTolerance = 1e-5f;
Tensor invert_augment(const Tensor& batch, const std::vector<AugmentParams>& applied);

/// Mean of sign(x) with sign(0) = 0.
float rt_estimate(std::span<const float> d_outputs_on_reals);

inline constexpr float kAdaTarget = 0.6f;
inline constexpr float kAdaStep = 0.005f;
inline constexpr float kAdaMaxP = 0.999f;
inline constexpr std::size_t kAdaInterval = 4;
inline constexpr float kAdaEmaDecay = 0.95f;

struct AdaState {
    float p = 0.0f;
    float rt = 0.0f;
    float target = kAdaTarget;
    float step = kAdaStep;
};

/// rt above target raises p by one step, below lowers it; p stays in [0, 0.999].
AdaState adjust_p(AdaState state, float rt);

/// Owns the state during training: smooths per-batch rt with an EMA and calls
/// adjust_p every `interval` discriminator steps.
class AdaController {
   public:
    explicit AdaController(AdaState initial = {}, std::size_t interval = kAdaInterval,
                           float ema_decay = kAdaEmaDecay);
    /// Returns true when this observation triggered an adjustment.
    bool observe(float batch_rt);
    const AdaState& state() const { return state_; }
    float smoothed_rt() const { return ema_; }

   private:
    AdaState state_;
    std::size_t interval_;
    float decay_;
    float ema_ = 0.0f;
    bool primed_ = false;
    std::size_t count_ = 0;
};

}  // namespace albumgan
