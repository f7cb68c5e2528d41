#include "albumgan/network.hpp"

#include <fmt/core.h>

#include <cmath>

#include "albumgan/autograd.hpp"
#include "albumgan/checkpoint.hpp"
#include "albumgan/data.hpp"

namespace albumgan {

namespace fs = std::filesystem;

Network Network::load(const fs::path& checkpoint) {
    const fs::path cfg = config_path_for(checkpoint);
    if (!fs::exists(cfg)) throw std::runtime_error(fmt::format("network config {} not found", cfg.string()));
    Network net;
    // Start from the model's defaults so older configs missing a key still load.
    const TrainConfig probe = load_config(cfg, TrainConfig{});
    net.config_ = load_config(cfg, TrainConfig::defaults_for(probe.model));
    net.config_.validate();
    const auto arrays = load_checkpoint(checkpoint);
    Rng rng(net.config_.seed);
    if (net.config_.model == ModelKind::style) {
        net.style_ = std::make_shared<StyleGenerator>(StyleConfig::from_train(net.config_), rng);
        net.style_->load_state(arrays, "g.");
    } else {
        net.conv_ = std::make_shared<ConvGan>(net.config_, rng);
        net.conv_->load_state(arrays);
    }
    return net;
}

std::size_t Network::latent_dim() const { return style_ ? style_->config().latent_dim : config_.latent_dim; }

const StyleGenerator& Network::style_generator() const {
    if (!style_) throw std::invalid_argument(fmt::format("{} network has no style generator", to_string(model())));
    return *style_;
}

std::vector<Image> Network::generate(const Tensor& z) const {
    NoGradGuard no_grad;
    if (style_) return render_batch(style_->synthesize(style_->map_styles(z)), OutputRange::symmetric);
    Rng unused(0);
    return render_batch(conv_->generate(z, nn::Mode::eval, unused), conv_->output_range());
}

std::vector<float> seed_latent(std::uint64_t seed, std::size_t dim, float tau) {
    Rng rng(seed);
    auto z = rng.normal_vector(dim);
    if (std::isfinite(tau)) z = truncate_z(z, tau, rng);
    return z;
}

}  // namespace albumgan
