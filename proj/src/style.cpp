#include "albumgan/style.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "albumgan/checkpoint.hpp"
#include "albumgan/ops.hpp"
#include "albumgan/train.hpp"

namespace albumgan {

// ---------------------------------------------------------------------------
// Style ops

namespace {

Tensor as_channel_map(const Tensor& v, std::size_t n, std::size_t c, const char* what) {
    if (v.shape() == Shape{c}) return reshape(v, {1, c, 1, 1});
    if (v.shape() == Shape{n, c}) return reshape(v, {n, c, 1, 1});
    throw ShapeError(fmt::format("adain: {} has shape {}, expected [{}] or [{}, {}]", what, to_string(v.shape()), c, n, c));
}

}  // namespace

Tensor adain(const Tensor& x, const Tensor& y_s, const Tensor& y_b, float eps) {
    if (x.ndim() != 4) throw ShapeError("adain: expected [N, C, H, W], got " + to_string(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1);
    const Tensor scale = as_channel_map(y_s, n, c, "y_s");
    const Tensor bias = as_channel_map(y_b, n, c, "y_b");
    const Tensor mu = mean(x, {2, 3}, true);
    const Tensor centered = sub(x, mu);
    const Tensor sigma = sqrt(add(mean(square(centered), {2, 3}, true), eps));
    return add(mul(div(centered, sigma), scale), bias);
}

Tensor pixel_norm(const Tensor& x, float eps) {
    if (x.ndim() != 2 && x.ndim() != 4) throw ShapeError("pixel_norm: expected [N, C] or [N, C, H, W]");
    return div(x, sqrt(add(mean(square(x), {1}, true), eps)));
}

std::vector<float> truncate_z(const std::vector<float>& z, float tau, Rng& rng) {
    if (!(tau > 0.0f)) throw std::invalid_argument("truncate_z: tau must be positive");
    std::vector<float> out = z;
    if (std::isinf(tau)) return out;
    for (auto& v : out) {
        while (std::abs(v) > tau) v = rng.normal();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equalized layers

namespace {

void load_into(Tensor& dst, const std::vector<nn::NamedTensor>& arrays, const std::string& name) {
    const Tensor& src = nn::find_named(arrays, name);
    if (src.shape() != dst.shape()) {
        throw ShapeError(fmt::format("{}: checkpoint shape {} vs model {}", name, to_string(src.shape()),
                                     to_string(dst.shape())));
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

Tensor normal_leaf(Shape shape, Rng& rng) {
    const std::size_t n = numel(shape);
    Tensor t = Tensor::from(std::move(shape), rng.normal_vector(n));
    t.set_requires_grad();
    return t;
}

Tensor constant_leaf(Shape shape, float value) {
    Tensor t = Tensor::full(std::move(shape), value);
    t.set_requires_grad();
    return t;
}

}  // namespace

EqualizedDense::EqualizedDense(std::size_t in, std::size_t out, Rng& rng, float bias_init)
    : weight_(normal_leaf({in, out}, rng)), bias_(constant_leaf({out}, bias_init)), scale_(nn::he_std(in)) {}

Tensor EqualizedDense::effective_weight() const { return mul(weight_, scale_); }

Tensor EqualizedDense::forward(const Tensor& x) const { return add(matmul(x, effective_weight()), bias_); }

std::vector<nn::NamedTensor> EqualizedDense::parameters(const std::string& prefix) const {
    return {{prefix + "weight", weight_}, {prefix + "bias", bias_}};
}

void EqualizedDense::load(const std::string& prefix, const std::vector<nn::NamedTensor>& arrays) {
    load_into(weight_, arrays, prefix + "weight");
    load_into(bias_, arrays, prefix + "bias");
}

EqualizedConv::EqualizedConv(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng)
    : weight_(normal_leaf({out, in, kernel, kernel}, rng)),
      bias_(constant_leaf({out}, 0.0f)),
      scale_(nn::he_std(in * kernel * kernel)),
      kernel_(kernel) {
    if (kernel % 2 == 0) throw std::invalid_argument("EqualizedConv: kernel must be odd");
}

Tensor EqualizedConv::effective_weight() const { return mul(weight_, scale_); }

Tensor EqualizedConv::forward(const Tensor& x) const {
    const Tensor y = conv2d(x, effective_weight(), 1, kernel_ / 2);
    return add(y, reshape(bias_, {1, bias_.numel(), 1, 1}));
}

std::vector<nn::NamedTensor> EqualizedConv::parameters(const std::string& prefix) const {
    return {{prefix + "weight", weight_}, {prefix + "bias", bias_}};
}

void EqualizedConv::load(const std::string& prefix, const std::vector<nn::NamedTensor>& arrays) {
    load_into(weight_, arrays, prefix + "weight");
    load_into(bias_, arrays, prefix + "bias");
}

// ---------------------------------------------------------------------------
// Config, style vectors, schedule

std::size_t StyleConfig::levels() const {
    std::size_t n = 1;
    for (std::size_t r = 4; r < resolution; r *= 2) ++n;
    return n;
}

StyleConfig StyleConfig::full_scale() {
    StyleConfig c;
    c.resolution = 256;
    c.latent_dim = 512;
    c.fmaps = 32;
    return c;
}

StyleConfig StyleConfig::from_train(const TrainConfig& t) {
    StyleConfig c;
    c.resolution = t.height;
    c.channels = t.channels;
    c.latent_dim = t.latent_dim;
    c.fmaps = t.style_fmaps;
    c.mapping_layers = t.mapping_layers;
    c.leaky_slope = t.leaky_slope;
    return c;
}

void StyleConfig::validate() const {
    if (resolution < 4 || (resolution & (resolution - 1)) != 0) {
        throw std::invalid_argument("style: resolution must be a power of two >= 4");
    }
    if (channels == 0 || latent_dim == 0 || fmaps == 0 || mapping_layers == 0) {
        throw std::invalid_argument("style: channels, latent_dim, fmaps and mapping_layers must be positive");
    }
}

StyleVector StyleVector::from_tensor(const Tensor& t) {
    if (t.ndim() != 2) throw ShapeError("StyleVector: expected [num_styles, latent_dim], got " + to_string(t.shape()));
    StyleVector v(t.dim(0), t.dim(1));
    std::copy(t.data().begin(), t.data().end(), v.w.begin());
    return v;
}

Tensor StyleVector::to_tensor() const { return Tensor::from({num_styles, latent_dim}, w); }

void save_style_vector(const std::filesystem::path& path, const StyleVector& w) {
    save_checkpoint(path, {{"w", w.to_tensor()}});
}

StyleVector load_style_vector(const std::filesystem::path& path) {
    return StyleVector::from_tensor(nn::find_named(load_checkpoint(path), "w"));
}

ProgressiveSchedule ProgressiveSchedule::at(std::size_t shown, std::size_t per_phase, std::size_t max_level) {
    if (per_phase == 0) throw std::invalid_argument("schedule: images_per_phase must be positive");
    ProgressiveSchedule s;
    s.images_per_phase = per_phase;
    const std::size_t phase = shown / per_phase;
    if (phase == 0) return s;
    s.level = (phase + 1) / 2;
    if (s.level > max_level) {
        s.level = max_level;
        return s;
    }
    if (phase % 2 == 1) {
        s.alpha = static_cast<float>(shown % per_phase) / static_cast<float>(per_phase);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Generator

StyleGenerator::StyleGenerator(const StyleConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const std::size_t f = config_.fmaps, l = config_.latent_dim;
    for (std::size_t i = 0; i < config_.mapping_layers; ++i) mapping_.emplace_back(l, l, rng);
    constant_ = normal_leaf({1, f, 4, 4}, rng);
    for (std::size_t level = 0; level < config_.levels(); ++level) {
        convs_.emplace_back(f, f, 3, rng);
        convs_.emplace_back(f, f, 3, rng);
        to_rgb_.emplace_back(f, config_.channels, 1, rng);
    }
    for (std::size_t s = 0; s < config_.num_styles(); ++s) style_affine_.emplace_back(l, 2 * f, rng);
}

Tensor StyleGenerator::map(const Tensor& z) const {
    if (z.ndim() != 2 || z.dim(1) != config_.latent_dim) {
        throw ShapeError(fmt::format("map: expected [N, {}], got {}", config_.latent_dim, to_string(z.shape())));
    }
    Tensor h = pixel_norm(z);
    for (const auto& layer : mapping_) h = leaky_relu(layer.forward(h), config_.leaky_slope);
    return h;
}

Tensor StyleGenerator::map_styles(const Tensor& z) const {
    const Tensor w = map(z);
    const std::size_t n = w.dim(0), l = w.dim(1);
    return expand(reshape(w, {n, 1, l}), {n, config_.num_styles(), l});
}

Tensor StyleGenerator::level_features(const Tensor& x, const Tensor& styles, std::size_t level) const {
    const std::size_t n = styles.dim(0), f = config_.fmaps, l = config_.latent_dim;
    std::vector<std::size_t> scale_idx(f), bias_idx(f);
    std::iota(scale_idx.begin(), scale_idx.end(), 0);
    std::iota(bias_idx.begin(), bias_idx.end(), f);

    Tensor h = level == 0 ? expand(constant_, {n, f, 4, 4}) : upsample_nearest2x(x);
    for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t slot = 2 * level + k;
        h = pixel_norm(leaky_relu(convs_[slot].forward(h), config_.leaky_slope));
        const Tensor w = reshape(index_select(styles, 1, {slot}), {n, l});
        const Tensor a = style_affine_[slot].forward(w);
        h = adain(h, add(index_select(a, 1, scale_idx), 1.0f), index_select(a, 1, bias_idx));
    }
    return h;
}

Tensor StyleGenerator::to_rgb(const Tensor& features, std::size_t level) const {
    return tanh(to_rgb_[level].forward(features));
}

Tensor StyleGenerator::synthesize(const Tensor& styles, const ProgressiveSchedule& schedule) const {
    if (styles.ndim() != 3 || styles.dim(1) != config_.num_styles() || styles.dim(2) != config_.latent_dim) {
        throw ShapeError(fmt::format("synthesize: expected [N, {}, {}], got {}", config_.num_styles(),
                                     config_.latent_dim, to_string(styles.shape())));
    }
    if (schedule.level >= config_.levels()) throw std::invalid_argument("synthesize: level beyond resolution");
    if (!(schedule.alpha >= 0.0f && schedule.alpha <= 1.0f)) throw std::invalid_argument("synthesize: alpha outside [0, 1]");
    Tensor h, previous;
    for (std::size_t level = 0; level <= schedule.level; ++level) {
        previous = h;
        h = level_features(h, styles, level);
    }
    const std::size_t top = schedule.level;
    if (top == 0 || schedule.alpha >= 1.0f) return to_rgb(h, top);
    const Tensor old = upsample_nearest2x(to_rgb(previous, top - 1));
    if (schedule.alpha <= 0.0f) return old;
    return add(mul(to_rgb(h, top), schedule.alpha), mul(old, 1.0f - schedule.alpha));
}

Tensor StyleGenerator::synthesize(const Tensor& styles) const {
    return synthesize(styles, ProgressiveSchedule{config_.levels() - 1, 1.0f, 0});
}

std::vector<float> StyleGenerator::mean_w(std::size_t samples, Rng& rng) const {
    if (samples == 0) throw std::invalid_argument("mean_w: need at least one sample");
    NoGradGuard no_grad;
    const Tensor w = map(sample_latents(samples, config_.latent_dim, rng));
    return mean(w, {0}, false).to_vector();
}

std::vector<Tensor> StyleGenerator::parameters() const {
    std::vector<Tensor> out;
    for (const auto& nt : state("")) out.push_back(nt.tensor);
    return out;
}

std::vector<nn::NamedTensor> StyleGenerator::state(const std::string& prefix) const {
    std::vector<nn::NamedTensor> out;
    auto append = [&](std::vector<nn::NamedTensor> v) { out.insert(out.end(), v.begin(), v.end()); };
    for (std::size_t i = 0; i < mapping_.size(); ++i) append(mapping_[i].parameters(fmt::format("{}mapping.{}.", prefix, i)));
    out.push_back({prefix + "const", constant_});
    for (std::size_t i = 0; i < convs_.size(); ++i) append(convs_[i].parameters(fmt::format("{}conv.{}.", prefix, i)));
    for (std::size_t i = 0; i < style_affine_.size(); ++i) {
        append(style_affine_[i].parameters(fmt::format("{}style.{}.", prefix, i)));
    }
    for (std::size_t i = 0; i < to_rgb_.size(); ++i) append(to_rgb_[i].parameters(fmt::format("{}torgb.{}.", prefix, i)));
    return out;
}

void StyleGenerator::load_state(const std::vector<nn::NamedTensor>& arrays, const std::string& prefix) {
    for (std::size_t i = 0; i < mapping_.size(); ++i) mapping_[i].load(fmt::format("{}mapping.{}.", prefix, i), arrays);
    load_into(constant_, arrays, prefix + "const");
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].load(fmt::format("{}conv.{}.", prefix, i), arrays);
    for (std::size_t i = 0; i < style_affine_.size(); ++i) {
        style_affine_[i].load(fmt::format("{}style.{}.", prefix, i), arrays);
    }
    for (std::size_t i = 0; i < to_rgb_.size(); ++i) to_rgb_[i].load(fmt::format("{}torgb.{}.", prefix, i), arrays);
}

StyleVector map_latent(const StyleGenerator& g, const std::vector<float>& z) {
    for (float v : z) {
        if (!std::isfinite(v)) throw NonFiniteError("map_latent: z must be finite");
    }
    NoGradGuard no_grad;
    const Tensor styles = g.map_styles(Tensor::from({1, z.size()}, z));
    return StyleVector::from_tensor(reshape(styles, {styles.dim(1), styles.dim(2)}));
}

// ---------------------------------------------------------------------------
// Discriminator

StyleDiscriminator::StyleDiscriminator(const StyleConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const std::size_t f = config_.fmaps;
    for (std::size_t level = 0; level < config_.levels(); ++level) {
        from_rgb_.emplace_back(config_.channels, f, 1, rng);
        convs_.emplace_back(f, f, 3, rng);
        convs_.emplace_back(f, f, 3, rng);
    }
    fc_ = EqualizedDense(f * 16, f, rng);
    out_ = EqualizedDense(f, 1, rng);
}

Tensor StyleDiscriminator::block(const Tensor& x, std::size_t level) const {
    const float a = config_.leaky_slope;
    Tensor h = leaky_relu(convs_[2 * level].forward(x), a);
    h = leaky_relu(convs_[2 * level + 1].forward(h), a);
    return level == 0 ? h : avg_pool2d(h, 2, 2);
}

Tensor StyleDiscriminator::forward(const Tensor& x, const ProgressiveSchedule& schedule) const {
    const std::size_t top = schedule.level;
    if (top >= config_.levels()) throw std::invalid_argument("discriminator: level beyond resolution");
    const std::size_t r = config_.resolution_at(top);
    if (x.ndim() != 4 || x.dim(1) != config_.channels || x.dim(2) != r || x.dim(3) != r) {
        throw ShapeError(fmt::format("discriminator: expected [N, {}, {}, {}], got {}", config_.channels, r, r,
                                     to_string(x.shape())));
    }
    const float a = config_.leaky_slope;
    Tensor h = block(leaky_relu(from_rgb_[top].forward(x), a), top);
    if (top > 0 && schedule.alpha < 1.0f) {
        const Tensor old = leaky_relu(from_rgb_[top - 1].forward(avg_pool2d(x, 2, 2)), a);
        h = add(mul(h, schedule.alpha), mul(old, 1.0f - schedule.alpha));
    }
    for (std::size_t level = top; level-- > 0;) h = block(h, level);
    h = leaky_relu(fc_.forward(flatten(h)), a);
    return out_.forward(h);
}

std::vector<Tensor> StyleDiscriminator::parameters() const {
    std::vector<Tensor> out;
    for (const auto& nt : state("")) out.push_back(nt.tensor);
    return out;
}

std::vector<nn::NamedTensor> StyleDiscriminator::state(const std::string& prefix) const {
    std::vector<nn::NamedTensor> out;
    auto append = [&](std::vector<nn::NamedTensor> v) { out.insert(out.end(), v.begin(), v.end()); };
    for (std::size_t i = 0; i < from_rgb_.size(); ++i) append(from_rgb_[i].parameters(fmt::format("{}fromrgb.{}.", prefix, i)));
    for (std::size_t i = 0; i < convs_.size(); ++i) append(convs_[i].parameters(fmt::format("{}conv.{}.", prefix, i)));
    append(fc_.parameters(prefix + "fc."));
    append(out_.parameters(prefix + "out."));
    return out;
}

void StyleDiscriminator::load_state(const std::vector<nn::NamedTensor>& arrays, const std::string& prefix) {
    for (std::size_t i = 0; i < from_rgb_.size(); ++i) from_rgb_[i].load(fmt::format("{}fromrgb.{}.", prefix, i), arrays);
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].load(fmt::format("{}conv.{}.", prefix, i), arrays);
    fc_.load(prefix + "fc.", arrays);
    out_.load(prefix + "out.", arrays);
}

Tensor downscale_reals(const Tensor& reals, const ProgressiveSchedule& schedule, std::size_t max_level) {
    if (schedule.level > max_level) throw std::invalid_argument("downscale_reals: level beyond max level");
    const std::size_t factor = std::size_t{1} << (max_level - schedule.level);
    const Tensor x = factor == 1 ? reals : avg_pool2d(reals, factor, factor);
    if (schedule.level == 0 || schedule.alpha >= 1.0f) return x;
    const Tensor coarse = upsample_nearest2x(avg_pool2d(x, 2, 2));
    return add(mul(x, schedule.alpha), mul(coarse, 1.0f - schedule.alpha));
}

}  // namespace albumgan
