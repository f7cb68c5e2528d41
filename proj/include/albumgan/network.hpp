#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "albumgan/image.hpp"
#include "albumgan/style.hpp"
#include "albumgan/train.hpp"

namespace albumgan {

/// A trained generator restored from a checkpoint and the .cfg stored next to it.
class Network {
   public:
    static Network load(const std::filesystem::path& checkpoint);

    const TrainConfig& config() const { return config_; }
    ModelKind model() const { return config_.model; }
    std::size_t latent_dim() const;
    bool is_style() const { return style_ != nullptr; }
    /// Throws std::invalid_argument for intro and DCGAN networks.
    const StyleGenerator& style_generator() const;

    /// z [N, latent_dim] -> images at full resolution.
    std::vector<Image> generate(const Tensor& z) const;

   private:
    TrainConfig config_;
    std::shared_ptr<ConvGan> conv_;
    std::shared_ptr<StyleGenerator> style_;
};

/// z for one seed: N(0, 1) draws from Rng(seed), then truncated at tau when
/// tau is finite.
std::vector<float> seed_latent(std::uint64_t seed, std::size_t dim, float tau);

}  // namespace albumgan
