#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "albumgan/nn.hpp"
#include "albumgan/rng.hpp"
#include "albumgan/tensor.hpp"

namespace albumgan {

struct TrainConfig;

/// Per-channel instance normalization followed by a style scale and bias.
/// x is [N, C, H, W]; y_s and y_b are [N, C] or [C].
inline constexpr float kAdainEpsilon = 1e-8f;
Tensor adain(const Tensor& x, const Tensor& y_s, const Tensor& y_b, float eps = kAdainEpsilon);

/// Divides every pixel's channel vector by its RMS, sqrt(mean_c x^2 + eps).
/// Works on [N, C, H, W] (axis 1) and [N, F] (axis 1).
inline constexpr float kPixelNormEpsilon = 1e-8f;
Tensor pixel_norm(const Tensor& x, float eps = kPixelNormEpsilon);

/// Resamples every component with |z_i| > tau from N(0, 1) until it fits.
/// tau = infinity is the identity.
std::vector<float> truncate_z(const std::vector<float>& z, float tau, Rng& rng);

/// Weights stored as N(0, 1) draws and scaled at every forward by the He
/// constant sqrt(2 / fan_in).
class EqualizedDense {
   public:
    EqualizedDense() = default;
    EqualizedDense(std::size_t in, std::size_t out, Rng& rng, float bias_init = 0.0f);
    Tensor forward(const Tensor& x) const;
    float runtime_scale() const { return scale_; }
    Tensor effective_weight() const;
    Tensor& raw() { return weight_; }
    const Tensor& raw() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    std::vector<nn::NamedTensor> parameters(const std::string& prefix) const;
    void load(const std::string& prefix, const std::vector<nn::NamedTensor>& arrays);

   private:
    Tensor weight_;  // [in, out]
    Tensor bias_;    // [out]
    float scale_ = 1.0f;
};

class EqualizedConv {
   public:
    EqualizedConv() = default;
    EqualizedConv(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
    /// Stride 1, "same" padding.
    Tensor forward(const Tensor& x) const;
    float runtime_scale() const { return scale_; }
    Tensor effective_weight() const;
    Tensor& raw() { return weight_; }
    const Tensor& raw() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    std::vector<nn::NamedTensor> parameters(const std::string& prefix) const;
    void load(const std::string& prefix, const std::vector<nn::NamedTensor>& arrays);

   private:
    Tensor weight_;  // [out, in, k, k]
    Tensor bias_;    // [out]
    float scale_ = 1.0f;
    std::size_t kernel_ = 1;
};

struct StyleConfig {
    std::size_t resolution = 32;
    std::size_t channels = 3;
    std::size_t latent_dim = 64;
    std::size_t fmaps = 32;
    std::size_t mapping_layers = 3;
    float leaky_slope = 0.2f;

    /// Synthesis levels 4x4, 8x8, ..., resolution.
    std::size_t levels() const;
    std::size_t num_styles() const { return 2 * levels(); }
    std::size_t resolution_at(std::size_t level) const { return std::size_t{4} << level; }

    /// 256x256x3 with 512-wide latents: StyleVector shape (14, 512).
    static StyleConfig full_scale();
    static StyleConfig from_train(const TrainConfig& config);
    void validate() const;
};

/// Style matrix of one sample; rows are synthesis style slots.
struct StyleVector {
    std::size_t num_styles = 0;
    std::size_t latent_dim = 0;
    std::vector<float> w;  // row-major (num_styles, latent_dim)

    StyleVector() = default;
    StyleVector(std::size_t rows, std::size_t cols) : num_styles(rows), latent_dim(cols), w(rows * cols, 0.0f) {}
    static StyleVector from_tensor(const Tensor& t);

    float& at(std::size_t row, std::size_t col) { return w[row * latent_dim + col]; }
    float at(std::size_t row, std::size_t col) const { return w[row * latent_dim + col]; }
    std::span<const float> row(std::size_t r) const { return {w.data() + r * latent_dim, latent_dim}; }
    /// [num_styles, latent_dim]
    Tensor to_tensor() const;
    bool operator==(const StyleVector& other) const = default;
};

/// Container with one array named "w" of shape (num_styles, latent_dim).
void save_style_vector(const std::filesystem::path& path, const StyleVector& w);
StyleVector load_style_vector(const std::filesystem::path& path);

struct ProgressiveSchedule {
    std::size_t level = 0;
    float alpha = 1.0f;
    std::size_t images_per_phase = 0;

    /// Phase 0 trains level 0; each later level has a fade phase (alpha rising
    /// linearly with images shown) followed by a stable phase.
    static ProgressiveSchedule at(std::size_t images_shown, std::size_t images_per_phase, std::size_t max_level);
};

class StyleGenerator {
   public:
    StyleGenerator(const StyleConfig& config, Rng& rng);

    const StyleConfig& config() const { return config_; }

    /// z [N, latent] -> w [N, latent] (before broadcasting to style slots).
    Tensor map(const Tensor& z) const;
    /// z [N, latent] -> styles [N, num_styles, latent], rows identical per sample.
    Tensor map_styles(const Tensor& z) const;
    /// Images [N, C, r, r] at the schedule's level, r = 4 * 2^level, values in [-1, 1].
    Tensor synthesize(const Tensor& styles, const ProgressiveSchedule& schedule) const;
    /// Full resolution, alpha = 1.
    Tensor synthesize(const Tensor& styles) const;
    /// Mean of map(z) over `samples` draws.
    std::vector<float> mean_w(std::size_t samples, Rng& rng) const;

    std::vector<Tensor> parameters() const;
    std::vector<nn::NamedTensor> state(const std::string& prefix = "g.") const;
    void load_state(const std::vector<nn::NamedTensor>& arrays, const std::string& prefix = "g.");

   private:
    Tensor level_features(const Tensor& x, const Tensor& styles, std::size_t level) const;
    Tensor to_rgb(const Tensor& features, std::size_t level) const;

    StyleConfig config_;
    std::vector<EqualizedDense> mapping_;
    Tensor constant_;                         // [1, fmaps, 4, 4]
    std::vector<EqualizedConv> convs_;        // two per level
    std::vector<EqualizedDense> style_affine_;  // one per style slot, latent -> 2 * fmaps
    std::vector<EqualizedConv> to_rgb_;       // one per level
};

/// z [latent] -> StyleVector.
StyleVector map_latent(const StyleGenerator& g, const std::vector<float>& z);

/// Progressive critic mirroring the generator's levels.
class StyleDiscriminator {
   public:
    StyleDiscriminator(const StyleConfig& config, Rng& rng);
    /// x [N, C, r, r] at the schedule's level -> scores [N, 1].
    Tensor forward(const Tensor& x, const ProgressiveSchedule& schedule) const;
    std::vector<Tensor> parameters() const;
    std::vector<nn::NamedTensor> state(const std::string& prefix = "d.") const;
    void load_state(const std::vector<nn::NamedTensor>& arrays, const std::string& prefix = "d.");

   private:
    Tensor block(const Tensor& x, std::size_t level) const;

    StyleConfig config_;
    std::vector<EqualizedConv> from_rgb_;  // per level
    std::vector<EqualizedConv> convs_;     // two per level
    EqualizedDense fc_;
    EqualizedDense out_;
};

/// Downscales full-resolution reals to the schedule's level, blending with the
/// coarser level during a fade.
Tensor downscale_reals(const Tensor& reals, const ProgressiveSchedule& schedule, std::size_t max_level);

}  // namespace albumgan
