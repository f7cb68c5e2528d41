#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "albumgan/tensor.hpp"

namespace albumgan {

struct AdamConfig {
    float lr = 2e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::uint64_t t = 0;
    float lr = 2e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    static AdamState for_size(std::size_t n, const AdamConfig& config);
};

/// One bias-corrected Adam update of `param` in place (no weight decay).
void adam_step(std::span<float> param, std::span<const float> grad, AdamState& state);

/// Adam over a fixed list of leaf tensors, reading their accumulated grads.
class Adam {
   public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    void step();
    void zero_grad();
    void set_lr(float lr);
    const AdamConfig& config() const { return config_; }
    const std::vector<AdamState>& states() const { return states_; }

   private:
    std::vector<Tensor> params_;
    std::vector<AdamState> states_;
    AdamConfig config_;
};

}  // namespace albumgan
