#include "albumgan/latent.hpp"

#include <fmt/core.h>

#include <cmath>
#include <json.hpp>
#include <numbers>
#include <stdexcept>

#include "albumgan/adam.hpp"
#include "albumgan/autograd.hpp"
#include "albumgan/data.hpp"
#include "albumgan/loss.hpp"
#include "albumgan/ops.hpp"

namespace albumgan {

namespace {

void require_same_shape(const StyleVector& a, const StyleVector& b, const char* op) {
    if (a.num_styles != b.num_styles || a.latent_dim != b.latent_dim) {
        throw ShapeError(fmt::format("{}: ({}, {}) vs ({}, {})", op, a.num_styles, a.latent_dim, b.num_styles,
                                     b.latent_dim));
    }
}

Tensor as_batch(const StyleVector& w) { return Tensor::from({1, w.num_styles, w.latent_dim}, w.w); }

}  // namespace

StyleVector interpolate(const StyleVector& a, const StyleVector& b, float lam) {
    require_same_shape(a, b, "interpolate");
    if (!(lam >= 0.0f && lam <= 1.0f)) throw std::invalid_argument("interpolate: lam outside [0, 1]");
    StyleVector out(a.num_styles, a.latent_dim);
    for (std::size_t i = 0; i < out.w.size(); ++i) {
        // Equal endpoints stay exact for every lam.
        out.w[i] = a.w[i] == b.w[i] ? a.w[i] : lam * b.w[i] + (1.0f - lam) * a.w[i];
    }
    return out;
}

StyleVector average(const std::vector<StyleVector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("average: no vectors");
    for (const auto& v : vectors) require_same_shape(vectors.front(), v, "average");
    StyleVector out(vectors.front().num_styles, vectors.front().latent_dim);
    const auto n = static_cast<double>(vectors.size());
    for (std::size_t i = 0; i < out.w.size(); ++i) {
        double acc = 0.0;
        for (const auto& v : vectors) acc += v.w[i];
        out.w[i] = static_cast<float>(acc / n);
    }
    return out;
}

StyleVector style_mix(const StyleVector& a, const StyleVector& b, std::size_t k) {
    require_same_shape(a, b, "style_mix");
    if (k > a.num_styles) throw std::invalid_argument(fmt::format("style_mix: k={} > num_styles={}", k, a.num_styles));
    StyleVector out = a;
    std::copy(b.w.begin(), b.w.begin() + static_cast<std::ptrdiff_t>(k * b.latent_dim), out.w.begin());
    return out;
}

Image render(const StyleGenerator& g, const StyleVector& w) {
    if (w.num_styles != g.config().num_styles() || w.latent_dim != g.config().latent_dim) {
        throw ShapeError(fmt::format("render: style vector ({}, {}) does not fit generator ({}, {})", w.num_styles,
                                     w.latent_dim, g.config().num_styles(), g.config().latent_dim));
    }
    NoGradGuard no_grad;
    return render_batch(g.synthesize(as_batch(w)), OutputRange::symmetric).front();
}

std::vector<Image> interpolation_sequence(const StyleGenerator& g, const StyleVector& a, const StyleVector& b,
                                          std::size_t divisions) {
    if (divisions == 0) throw std::invalid_argument("interpolation_sequence: divisions must be positive");
    std::vector<Image> frames;
    frames.reserve(divisions);
    for (std::size_t i = 0; i < divisions; ++i) {
        const float lam = static_cast<float>(i) / static_cast<float>(divisions);
        frames.push_back(render(g, interpolate(a, b, lam)));
    }
    return frames;
}

MixingGrid mixing_grid(const std::vector<StyleVector>& sources, std::size_t k, const StyleGenerator& g,
                       std::vector<std::string> labels) {
    if (sources.empty()) throw std::invalid_argument("mixing_grid: no sources");
    if (labels.empty()) {
        for (std::size_t i = 0; i < sources.size(); ++i) labels.push_back(fmt::format("source{}", i));
    }
    if (labels.size() != sources.size()) throw std::invalid_argument("mixing_grid: one label per source required");
    MixingGrid grid;
    grid.k = k;
    grid.labels = std::move(labels);
    std::vector<Image> flat;
    for (const auto& a : sources) {
        auto& row = grid.tiles.emplace_back();
        for (const auto& b : sources) {
            row.push_back(render(g, style_mix(a, b, k)));
            flat.push_back(row.back());
        }
    }
    grid.image = tile_grid(flat, sources.size());
    return grid;
}

void write_mixing_grid(const std::filesystem::path& png, const MixingGrid& grid) {
    write_png(png, grid.image);
    const std::size_t tile = grid.tiles.front().front().width;
    nlohmann::json sidecar{{"k", grid.k},
                           {"rows", grid.labels},
                           {"cols", grid.labels},
                           {"tile_size", tile},
                           {"padding", 2},
                           {"cell", "rows [0, k) of the column source, the rest from the row source"}};
    std::filesystem::path json_path = png;
    json_path.replace_extension(".json");
    const std::string text = sidecar.dump(2) + "\n";
    write_file(json_path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

float projection_lr_scale(float t, float rampdown, float rampup) {
    float scale = rampdown > 0.0f ? std::min(1.0f, (1.0f - t) / rampdown) : 1.0f;
    scale = 0.5f - 0.5f * std::cos(scale * std::numbers::pi_v<float>);
    if (rampup > 0.0f) scale *= std::min(1.0f, t / rampup);
    return scale;
}

ProjectionRun project(const Tensor& target, const StyleGenerator& g, const ProjectOptions& options) {
    const StyleConfig& c = g.config();
    const Shape expected{1, c.channels, c.resolution, c.resolution};
    Tensor goal = target.ndim() == 3 ? reshape(target, {1, target.dim(0), target.dim(1), target.dim(2)}) : target;
    if (goal.shape() != expected) {
        throw ShapeError(fmt::format("project: target {} does not match generator output {}", to_string(target.shape()),
                                     to_string(expected)));
    }
    goal = goal.detach();
    if (options.steps == 0) throw std::invalid_argument("project: steps must be positive");

    StyleVector start;
    if (options.init) {
        start = *options.init;
        if (start.num_styles != c.num_styles() || start.latent_dim != c.latent_dim) {
            throw ShapeError("project: init vector does not fit the generator");
        }
    } else {
        Rng rng(options.seed);
        const auto mean = g.mean_w(options.mean_samples, rng);
        start = StyleVector(c.num_styles(), c.latent_dim);
        for (std::size_t r = 0; r < c.num_styles(); ++r) std::copy(mean.begin(), mean.end(), start.w.begin() + r * c.latent_dim);
    }

    Tensor w = as_batch(start);
    w.set_requires_grad();
    Adam opt({w}, AdamConfig{options.lr, 0.9f, 0.999f, 1e-8f});

    ProjectionRun run;
    run.steps = options.steps;
    run.loss_trace.reserve(options.steps);
    for (std::size_t step = 0; step < options.steps; ++step) {
        const float t = static_cast<float>(step) / static_cast<float>(options.steps);
        opt.set_lr(options.lr * projection_lr_scale(t, options.rampdown, options.rampup));
        opt.zero_grad();
        const Tensor loss = mse_loss(g.synthesize(w), goal);
        const float value = loss.item();
        if (!std::isfinite(value)) throw NonFiniteError(fmt::format("project: non-finite loss at step {}", step));
        run.loss_trace.push_back(value);
        backward(loss);
        opt.step();
    }
    run.w = StyleVector::from_tensor(reshape(w.detach(), {c.num_styles(), c.latent_dim}));
    return run;
}

Tensor projection_target(const Image& image, const StyleConfig& config) {
    Image im = convert_channels(image, config.channels);
    if (im.width != config.resolution || im.height != config.resolution) {
        im = resize_lanczos(im, config.resolution, config.resolution);
    }
    const std::size_t idx = 0;
    return to_batch({im}, std::span<const std::size_t>(&idx, 1), ChannelStats::uniform(config.channels, 0.5f, 0.5f));
}

}  // namespace albumgan
