#include "albumgan/style_train.hpp"

#include <fmt/core.h>

#include <cmath>

#include "albumgan/adam.hpp"
#include "albumgan/autograd.hpp"
#include "albumgan/checkpoint.hpp"
#include "albumgan/image.hpp"
#include "albumgan/log.hpp"
#include "albumgan/ops.hpp"

namespace albumgan {

namespace fs = std::filesystem;

std::vector<nn::NamedTensor> StyleGan::state() const {
    auto out = g.state("g.");
    auto dd = d.state("d.");
    out.insert(out.end(), dd.begin(), dd.end());
    return out;
}

void StyleGan::load_state(const std::vector<nn::NamedTensor>& arrays) {
    g.load_state(arrays, "g.");
    d.load_state(arrays, "d.");
}

CriticStep critic_loss(const StyleGan& gan, const Tensor& reals, const Tensor& fakes, const ProgressiveSchedule& schedule,
                       float p, float gp_lambda, Rng& rng, const AugmentConfig& augment_config) {
    if (reals.shape() != fakes.shape()) throw ShapeError("critic_loss: real and fake batches differ in shape");
    const Tensor real_aug = augment(reals, p, rng, augment_config);
    const Tensor fake_aug = augment(fakes, p, rng, augment_config);
    const Tensor real_scores = gan.d.forward(real_aug, schedule);
    const Tensor fake_scores = gan.d.forward(fake_aug, schedule);

    const std::size_t n = reals.dim(0), per = reals.numel() / n;
    const auto r = real_aug.data(), f = fake_aug.data();
    std::vector<float> mixed(reals.numel());
    for (std::size_t i = 0; i < n; ++i) {
        const float e = rng.uniform();
        for (std::size_t k = i * per; k < (i + 1) * per; ++k) mixed[k] = e * r[k] + (1.0f - e) * f[k];
    }
    Tensor x_hat = Tensor::from(reals.shape(), std::move(mixed));
    x_hat.set_requires_grad();
    const Tensor grads = gradients(sum(gan.d.forward(x_hat, schedule)), {x_hat}, true)[0];

    Tensor loss = wgan_gp_loss(fake_scores, real_scores, grads, gp_lambda);
    loss = add(loss, mul(mean(square(real_scores)), kCriticDrift));
    return {loss, real_scores};
}

namespace {

Rng derived(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, 0x5eedu};
    std::mt19937_64 e(seq);
    return Rng(e());
}

}  // namespace

TrainOutputs train_style_gan(const TrainConfig& config, const Tensor& dataset, const fs::path& outdir,
                             const TrainHooks& hooks) {
    config.validate();
    if (config.model != ModelKind::style) throw std::invalid_argument("train_style_gan: config model is not style");
    const StyleConfig sc = StyleConfig::from_train(config);
    if (dataset.ndim() != 4 || dataset.dim(1) != sc.channels || dataset.dim(2) != sc.resolution ||
        dataset.dim(3) != sc.resolution) {
        throw ShapeError(fmt::format("train: dataset {} does not match config [N, {}, {}, {}]",
                                     to_string(dataset.shape()), sc.channels, sc.resolution, sc.resolution));
    }
    const std::size_t total = dataset.dim(0);
    if (total == 0) throw std::invalid_argument("train: empty dataset");

    Rng init_rng = derived(config.seed, 1);
    Rng data_rng = derived(config.seed, 2);
    Rng latent_rng = derived(config.seed, 3);
    Rng augment_rng = derived(config.seed, 4);
    Rng grid_rng = derived(config.seed, 6);

    StyleGan gan(sc, init_rng);
    const AdamConfig adam{config.lr, config.beta1, config.beta2, config.eps};
    Adam opt_g(gan.g.parameters(), adam);
    Adam opt_d(gan.d.parameters(), adam);
    AdaController ada(AdaState{0.0f, 0.0f, config.ada_target, kAdaStep});
    const Tensor grid_z = sample_latents(config.grid_samples, sc.latent_dim, grid_rng);
    const std::size_t max_level = sc.levels() - 1;

    fs::create_directories(outdir / kCheckpointDir);
    fs::create_directories(outdir / kGridDir);

    TrainOutputs out;
    const std::size_t batches = batches_per_epoch(total, config.batch_size);
    const std::size_t b = config.batch_size;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::size_t shown = 0, iter = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        ProgressiveSchedule schedule;
        for (std::size_t k = 0; k < batches; ++k) {
            ++iter;
            schedule = ProgressiveSchedule::at(shown, config.images_per_phase, max_level);
            std::vector<std::size_t> idx;
            while (idx.size() < b) {
                if (cursor == order.size()) {
                    order = data_rng.permutation(total);
                    cursor = 0;
                }
                idx.push_back(order[cursor++]);
            }
            const float p = config.ada ? ada.state().p : 0.0f;
            LossRecord record;
            record.iter = iter;
            try {
                const Tensor reals = downscale_reals(index_select(dataset, 0, idx), schedule, max_level);
                Tensor fakes;
                {
                    NoGradGuard no_grad;
                    fakes = gan.g.synthesize(gan.g.map_styles(sample_latents(b, sc.latent_dim, latent_rng)), schedule);
                }
                opt_d.zero_grad();
                const CriticStep critic = critic_loss(gan, reals, fakes, schedule, p, config.gp_lambda, augment_rng);
                backward(critic.loss);
                opt_d.step();
                record.d_loss = critic.loss.item();
                if (config.ada && ada.observe(rt_estimate(critic.real_scores.data()))) {
                    record.ada_p = ada.state().p;
                    record.ada_rt = ada.smoothed_rt();
                }

                opt_g.zero_grad();
                const Tensor z = sample_latents(b, sc.latent_dim, latent_rng);
                const Tensor images = augment(gan.g.synthesize(gan.g.map_styles(z), schedule), p, augment_rng);
                const Tensor g_loss = neg(mean(gan.d.forward(images, schedule)));
                backward(g_loss);
                opt_g.step();
                record.g_loss = g_loss.item();
            } catch (const NonFiniteError& e) {
                throw TrainingError(fmt::format("non-finite value at epoch {} iteration {}: {}", epoch, iter, e.what()));
            }
            if (!std::isfinite(record.g_loss) || !std::isfinite(record.d_loss)) {
                throw TrainingError(fmt::format("non-finite loss at epoch {} iteration {}: g={} d={}", epoch, iter,
                                                record.g_loss, record.d_loss));
            }
            shown += b;
            out.reals_shown = shown;
            out.history.add(record);
            if (hooks.on_iteration) hooks.on_iteration(out.history.records().back());
        }
        logging::info("epoch {}/{}: level={} alpha={:.3f} p={:.3f} g_loss={:.4f} d_loss={:.4f} kimg={:.3f}", epoch,
                      config.epochs, schedule.level, schedule.alpha, ada.state().p,
                      out.history.records().back().g_loss, out.history.records().back().d_loss,
                      static_cast<double>(shown) / 1000.0);

        const fs::path ckpt = outdir / kCheckpointDir / fmt::format("epoch_{:04d}.ckpt", epoch);
        save_checkpoint(ckpt, gan.state());
        save_config(config_path_for(ckpt), config);
        out.checkpoints.push_back(ckpt);

        if ((config.grid_interval > 0 && epoch % config.grid_interval == 0) || epoch == config.epochs) {
            Tensor samples;
            {
                NoGradGuard no_grad;
                samples = gan.g.synthesize(gan.g.map_styles(grid_z), schedule);
            }
            const fs::path grid = outdir / kGridDir / fmt::format("epoch_{:04d}.png", epoch);
            const auto tiles = render_batch(samples, OutputRange::symmetric);
            const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
            write_png(grid, tile_grid(tiles, cols));
            out.grids.push_back(grid);
            if (samples.dim(0) >= 2) out.collapse_score = detect_mode_collapse(samples, OutputRange::symmetric);
        }
    }

    out.history.write_csv(outdir / kLossCsv);
    save_checkpoint(outdir / kNetworkFile, gan.state());
    save_config(config_path_for(outdir / kNetworkFile), config);
    return out;
}

}  // namespace albumgan
