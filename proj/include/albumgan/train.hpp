#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "albumgan/data.hpp"
#include "albumgan/loss.hpp"
#include "albumgan/nn.hpp"
#include "albumgan/rng.hpp"
#include "albumgan/tensor.hpp"

namespace albumgan {

enum class ModelKind { intro, dcgan, style };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);
LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// Raised for unknown keys or malformed values; key() names the offending key.
class ConfigError : public std::invalid_argument {
   public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

   private:
    std::string key_;
};

struct TrainConfig {
    ModelKind model = ModelKind::intro;
    std::size_t batch_size = 256;
    std::size_t channels = 1;
    std::size_t height = 28;
    std::size_t width = 28;
    float lr = 2e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    std::size_t latent_dim = 100;
    std::size_t epochs = 100;
    float leaky_slope = 0.2f;
    nn::InitScheme init = nn::InitScheme::xavier_normalized;
    NormalizeMode normalize_mode = NormalizeMode::unit;
    std::optional<std::pair<float, float>> label_smoothing;
    std::optional<float> noisy_label_ratio;
    float dropout = 0.4f;
    LossKind loss = LossKind::bce;
    std::uint64_t seed = 0;

    // Output cadence.
    std::size_t grid_interval = 10;
    std::size_t grid_samples = 16;

    // DCGAN feature widths (ngf / ndf).
    std::size_t g_features = 64;
    std::size_t d_features = 64;

    // Style model.
    std::size_t style_fmaps = 32;
    std::size_t mapping_layers = 3;
    std::size_t images_per_phase = 2000;
    float gp_lambda = kDefaultPenaltyWeight;
    bool ada = true;
    float ada_target = 0.6f;

    static TrainConfig intro_defaults();
    static TrainConfig dcgan_defaults();
    /// Desk-scale style model: 32x32x3, latent 64.
    static TrainConfig style_defaults();
    static TrainConfig defaults_for(ModelKind model);

    /// Throws ConfigError on violated invariants.
    void validate() const;

    /// Sets one key from its textual value.
    void set(const std::string& key, const std::string& value);
    /// Flat key=value lines, '#' comments.
    std::string to_text() const;
};

/// Parses key=value text on top of `base`; unknown keys throw ConfigError.
TrainConfig parse_config(const std::string& text, TrainConfig base);
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base);
void save_config(const std::filesystem::path& path, const TrainConfig& config);

std::size_t batches_per_epoch(std::size_t total_images, std::size_t batch_size);

struct LossRecord {
    std::size_t iter = 0;
    float g_loss = 0.0f;
    float d_loss = 0.0f;
    // Style runs only, set on iterations where the ADA controller adjusted p.
    std::optional<float> ada_p;
    std::optional<float> ada_rt;
};

class LossHistory {
   public:
    /// Throws std::invalid_argument unless iter is strictly increasing.
    void add(LossRecord record);
    void add(std::size_t iter, float g_loss, float d_loss) { add(LossRecord{iter, g_loss, d_loss, {}, {}}); }
    const std::vector<LossRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// Header iter,g_loss,d_loss (plus ada_p,ada_rt when any record has them).
    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
    static LossHistory parse_csv(const std::string& text);

   private:
    std::vector<LossRecord> records_;
};

/// One-sided smoothing: entries equal to 1 are redrawn from U[lo, hi].
std::vector<float> smooth_labels(const std::vector<float>& labels, float lo, float hi, Rng& rng);

struct LabelSwap {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (real index, fake index)
};

struct SwappedBatches {
    Tensor real;
    Tensor fake;
    LabelSwap swap;
};

/// Exchanges floor(ratio * n) samples between the two batches (n = real batch size).
SwappedBatches noisy_labels(const Tensor& real, const Tensor& fake, float ratio, Rng& rng);
/// Applies a recorded swap; applying the same swap twice is the identity.
SwappedBatches apply_swap(const Tensor& real, const Tensor& fake, const LabelSwap& swap);

inline constexpr float kDivergenceFactor = 1.5f;
inline constexpr std::size_t kDivergenceWindow = 500;

/// First iteration whose trailing-window g_loss mean exceeds factor times the
/// smallest window mean seen before it.
std::optional<std::size_t> detect_divergence(const LossHistory& history, std::size_t window = kDivergenceWindow,
                                             float factor = kDivergenceFactor);

/// Mean pairwise cosine similarity of flattened samples after mapping them to
/// [-1, 1], clamped to [0, 1].
float detect_mode_collapse(const Tensor& samples, OutputRange range = OutputRange::symmetric);

class TrainingError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Generator/discriminator pair for the intro and DCGAN models.
class ConvGan {
   public:
    ConvGan(const TrainConfig& config, Rng& rng);

    /// z is [N, latent_dim]; output is [N, C, H, W] in the model's output range.
    Tensor generate(const Tensor& z, nn::Mode mode, Rng& rng);
    /// Probabilities [N, 1].
    Tensor discriminate(const Tensor& x, nn::Mode mode, Rng& rng);

    nn::Sequential& generator() { return g_; }
    nn::Sequential& discriminator() { return d_; }
    OutputRange output_range() const { return range_; }
    const TrainConfig& config() const { return config_; }

    std::vector<nn::NamedTensor> state() const;
    void load_state(const std::vector<nn::NamedTensor>& arrays);

   private:
    TrainConfig config_;
    nn::Sequential g_;
    nn::Sequential d_;
    OutputRange range_;
};

std::vector<nn::LayerSpec> intro_generator_specs(const TrainConfig& config);
std::vector<nn::LayerSpec> intro_discriminator_specs(const TrainConfig& config);
std::vector<nn::LayerSpec> dcgan_generator_specs(const TrainConfig& config);
std::vector<nn::LayerSpec> dcgan_discriminator_specs(const TrainConfig& config);

/// Latent batch [n, dim] drawn from N(0, 1).
Tensor sample_latents(std::size_t n, std::size_t dim, Rng& rng);

struct TrainOutputs {
    LossHistory history;
    std::vector<std::filesystem::path> checkpoints;
    std::vector<std::filesystem::path> grids;
    // Collapse score of the last sample grid.
    float collapse_score = 0.0f;
    // Real images passed to the discriminator (KIMG = reals_shown / 1000).
    std::size_t reals_shown = 0;
};

struct TrainHooks {
    // Invoked after every iteration with the record just added.
    std::function<void(const LossRecord&)> on_iteration;
};

/// File names used inside a run directory.
inline constexpr const char* kLossCsv = "loss.csv";
inline constexpr const char* kNetworkFile = "network.ckpt";
inline constexpr const char* kCheckpointDir = "checkpoints";
inline constexpr const char* kGridDir = "grids";

/// Config stored next to a checkpoint (same stem, ".cfg").
std::filesystem::path config_path_for(const std::filesystem::path& checkpoint);

/// Trains an intro or DCGAN model. The dataset is a normalized [N, C, H, W]
/// tensor matching the config shape. Writes loss.csv, per-epoch checkpoints,
/// network.ckpt and sample grids under outdir.
TrainOutputs train_conv_gan(const TrainConfig& config, const Tensor& dataset, const std::filesystem::path& outdir,
                            const TrainHooks& hooks = {});

}  // namespace albumgan
