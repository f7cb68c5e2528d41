#include "albumgan/ada.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "albumgan/ops.hpp"

namespace albumgan {

AugmentConfig AugmentConfig::flip_only() {
    AugmentConfig c;
    c.rot90 = c.translate = c.brightness = c.saturation = false;
    return c;
}

namespace {

struct Pos {
    std::int64_t y, x;
};

std::int64_t wrap(std::int64_t v, std::int64_t n) { return ((v % n) + n) % n; }

// One counter-clockwise quarter turn of a square grid of side n, and its inverse.
Pos rot_fwd(Pos p, std::int64_t n) { return {n - 1 - p.x, p.y}; }
Pos rot_inv(Pos p, std::int64_t n) { return {p.x, n - 1 - p.y}; }

// Position in the augmented image of source pixel q.
Pos forward_map(Pos q, const AugmentParams& a, std::int64_t h, std::int64_t w) {
    if (a.flipped) q.x = w - 1 - q.x;
    for (int k = 0; k < a.quarter_turns; ++k) q = rot_fwd(q, w);
    return {wrap(q.y + a.shift_y, h), wrap(q.x + a.shift_x, w)};
}

// Source pixel of augmented position p.
Pos inverse_map(Pos p, const AugmentParams& a, std::int64_t h, std::int64_t w) {
    Pos q{wrap(p.y - a.shift_y, h), wrap(p.x - a.shift_x, w)};
    for (int k = 0; k < a.quarter_turns; ++k) q = rot_inv(q, w);
    if (a.flipped) q.x = w - 1 - q.x;
    return q;
}

bool geometric(const AugmentParams& a) { return a.flipped || a.quarter_turns != 0 || a.shift_x != 0 || a.shift_y != 0; }

template <typename Map>
Tensor remap(const Tensor& x, const std::vector<AugmentParams>& params, Map map) {
    const auto n = static_cast<std::int64_t>(x.dim(0)), c = static_cast<std::int64_t>(x.dim(1));
    const auto h = static_cast<std::int64_t>(x.dim(2)), w = static_cast<std::int64_t>(x.dim(3));
    auto index = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n * c * h * w));
    auto& idx = *index;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t xx = 0; xx < w; ++xx) {
                const Pos s = map(Pos{y, xx}, params[static_cast<std::size_t>(i)], h, w);
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    idx[static_cast<std::size_t>(((i * c + ch) * h + y) * w + xx)] = ((i * c + ch) * h + s.y) * w + s.x;
                }
            }
    }
    return gather(x, index, x.shape());
}

Tensor per_image(const std::vector<float>& values) {
    return Tensor::from({values.size(), 1, 1, 1}, values);
}

Tensor saturate(const Tensor& x, const std::vector<float>& scale) {
    const Tensor m = mean(x, {1}, true);
    return add(m, mul(sub(x, m), per_image(scale)));
}

void check_batch(const Tensor& batch, const char* op) {
    if (batch.ndim() != 4) throw ShapeError(std::string(op) + ": expected [N, C, H, W], got " + to_string(batch.shape()));
}

}  // namespace

Tensor augment(const Tensor& batch, float p, Rng& rng, const AugmentConfig& config,
               std::vector<AugmentParams>* applied) {
    check_batch(batch, "augment");
    if (!(p >= 0.0f && p <= 1.0f)) throw std::invalid_argument("augment: p outside [0, 1]");
    const std::size_t n = batch.dim(0), h = batch.dim(2), w = batch.dim(3);
    if (config.rot90 && h != w) throw ShapeError("augment: rotation needs square images");
    const auto max_shift = static_cast<std::int64_t>(std::lround(config.max_translate * static_cast<float>(w)));
    const auto max_shift_y = static_cast<std::int64_t>(std::lround(config.max_translate * static_cast<float>(h)));
    const float log_sat = std::log2(config.max_saturation);

    std::vector<AugmentParams> params(n);
    bool any_geo = false, any_bright = false, any_sat = false;
    for (auto& a : params) {
        if (p <= 0.0f) break;
        if (config.hflip && rng.bernoulli(p)) a.flipped = true;
        if (config.rot90 && rng.bernoulli(p)) a.quarter_turns = static_cast<int>(rng.integer(1, 3));
        if (config.translate && rng.bernoulli(p)) {
            a.shift_x = static_cast<int>(rng.integer(-max_shift, max_shift));
            a.shift_y = static_cast<int>(rng.integer(-max_shift_y, max_shift_y));
        }
        if (config.brightness && rng.bernoulli(p)) a.brightness = rng.uniform(-config.max_brightness, config.max_brightness);
        if (config.saturation && rng.bernoulli(p)) a.saturation = std::exp2(rng.uniform(-log_sat, log_sat));
        any_geo = any_geo || geometric(a);
        any_bright = any_bright || a.brightness != 0.0f;
        any_sat = any_sat || a.saturation != 1.0f;
    }

    Tensor out = batch;
    if (any_geo) out = remap(out, params, inverse_map);
    if (any_bright) {
        std::vector<float> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = params[i].brightness;
        out = add(out, per_image(b));
    }
    if (any_sat && batch.dim(1) > 1) {
        std::vector<float> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = params[i].saturation;
        out = saturate(out, s);
    }
    if (applied) *applied = std::move(params);
    return out;
}

Tensor invert_augment(const Tensor& batch, const std::vector<AugmentParams>& applied) {
    check_batch(batch, "invert_augment");
    const std::size_t n = batch.dim(0);
    if (applied.size() != n) throw std::invalid_argument("invert_augment: one parameter set per image required");
    Tensor out = batch;
    if (batch.dim(1) > 1) {
        std::vector<float> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = 1.0f / applied[i].saturation;
        out = saturate(out, s);
    }
    std::vector<float> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = -applied[i].brightness;
    out = add(out, per_image(b));
    if (std::any_of(applied.begin(), applied.end(), geometric)) out = remap(out, applied, forward_map);
    return out;
}

float rt_estimate(std::span<const float> d) {
    if (d.empty()) throw std::invalid_argument("rt_estimate: no discriminator outputs");
    double acc = 0.0;
    for (float v : d) acc += (v > 0.0f) - (v < 0.0f);
    return static_cast<float>(acc / static_cast<double>(d.size()));
}

AdaState adjust_p(AdaState state, float rt) {
    state.rt = rt;
    if (rt > state.target) {
        state.p += state.step;
    } else if (rt < state.target) {
        state.p -= state.step;
    }
    state.p = std::clamp(state.p, 0.0f, kAdaMaxP);
    return state;
}

AdaController::AdaController(AdaState initial, std::size_t interval, float ema_decay)
    : state_(initial), interval_(interval), decay_(ema_decay) {
    if (interval_ == 0) throw std::invalid_argument("AdaController: interval must be positive");
    if (!(decay_ >= 0.0f && decay_ < 1.0f)) throw std::invalid_argument("AdaController: decay outside [0, 1)");
}

bool AdaController::observe(float batch_rt) {
    ema_ = primed_ ? decay_ * ema_ + (1.0f - decay_) * batch_rt : batch_rt;
    primed_ = true;
    if (++count_ % interval_ != 0) return false;
    state_ = adjust_p(state_, ema_);
    return true;
}

}  // namespace albumgan
