#include "albumgan/train.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "albumgan/adam.hpp"
#include "albumgan/autograd.hpp"
#include "albumgan/checkpoint.hpp"
#include "albumgan/image.hpp"
#include "albumgan/log.hpp"
#include "albumgan/ops.hpp"

namespace albumgan {

namespace fs = std::filesystem;
using nn::LayerSpec;

ModelKind parse_model_kind(const std::string& name) {
    if (name == "intro") return ModelKind::intro;
    if (name == "dcgan") return ModelKind::dcgan;
    if (name == "style") return ModelKind::style;
    throw std::invalid_argument("unknown model '" + name + "' (expected intro, dcgan or style)");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::intro: return "intro";
        case ModelKind::dcgan: return "dcgan";
        case ModelKind::style: return "style";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& name) {
    if (name == "mse") return LossKind::mse;
    if (name == "bce") return LossKind::bce;
    if (name == "cce") return LossKind::cce;
    if (name == "wgan_gp") return LossKind::wgan_gp;
    throw std::invalid_argument("unknown loss '" + name + "'");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::mse: return "mse";
        case LossKind::bce: return "bce";
        case LossKind::cce: return "cce";
        case LossKind::wgan_gp: return "wgan_gp";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Config

TrainConfig TrainConfig::intro_defaults() {
    TrainConfig c;
    c.model = ModelKind::intro;
    c.eps = 1e-7f;  // Keras default
    return c;
}

TrainConfig TrainConfig::dcgan_defaults() {
    TrainConfig c;
    c.model = ModelKind::dcgan;
    c.batch_size = 128;
    c.channels = 3;
    c.height = c.width = 64;
    c.epochs = 5;
    c.init = nn::InitScheme::default_dcgan;
    c.normalize_mode = NormalizeMode::hardcoded_half;
    c.dropout = 0.0f;
    return c;
}

TrainConfig TrainConfig::style_defaults() {
    TrainConfig c;
    c.model = ModelKind::style;
    c.batch_size = 16;
    c.channels = 3;
    c.height = c.width = 32;
    c.lr = 2.5e-3f;
    c.beta1 = 0.0f;
    c.beta2 = 0.99f;
    c.eps = 1e-8f;
    c.latent_dim = 64;
    c.epochs = 20;
    c.normalize_mode = NormalizeMode::hardcoded_half;
    c.dropout = 0.0f;
    c.loss = LossKind::wgan_gp;
    return c;
}

TrainConfig TrainConfig::defaults_for(ModelKind model) {
    switch (model) {
        case ModelKind::intro: return intro_defaults();
        case ModelKind::dcgan: return dcgan_defaults();
        case ModelKind::style: return style_defaults();
    }
    return {};
}

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

void require(bool ok, const char* key, const std::string& message) {
    if (!ok) throw ConfigError(key, fmt::format("{}: {}", key, message));
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        const auto out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key, fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
    }
}

float parse_float(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const float out = std::stof(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key, fmt::format("{}: expected a number, got '{}'", key, v));
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, fmt::format("{}: expected true or false, got '{}'", key, v));
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, fmt::format("{}: {}", key, e.what()));
    }
}

}  // namespace

void TrainConfig::validate() const {
    require(batch_size >= 2, "batch_size", "must be at least 2");
    require(latent_dim >= 1, "latent_dim", "must be at least 1");
    require(lr > 0.0f && std::isfinite(lr), "lr", "must be positive");
    require(beta1 >= 0.0f && beta1 < 1.0f, "beta1", "must lie in [0, 1)");
    require(beta2 >= 0.0f && beta2 < 1.0f, "beta2", "must lie in [0, 1)");
    require(eps > 0.0f, "eps", "must be positive");
    require(epochs >= 1, "epochs", "must be at least 1");
    require(leaky_slope > 0.0f && leaky_slope < 1.0f, "leaky_slope", "must lie in (0, 1)");
    require(channels == 1 || channels == 3, "channels", "must be 1 or 3");
    require(dropout >= 0.0f && dropout < 1.0f, "dropout", "must lie in [0, 1)");
    require(grid_samples >= 1, "grid_samples", "must be at least 1");
    if (label_smoothing) {
        require(label_smoothing->first > 0.0f && label_smoothing->first <= label_smoothing->second,
                "label_smoothing", "needs 0 < lo <= hi");
    }
    if (noisy_label_ratio) {
        require(*noisy_label_ratio >= 0.0f && *noisy_label_ratio <= 1.0f, "noisy_label_ratio",
                "must lie in [0, 1]");
    }
    switch (model) {
        case ModelKind::intro:
            require(height % 4 == 0 && width % 4 == 0 && height >= 4 && width >= 4, "height",
                    "intro model needs height and width divisible by 4");
            require(init != nn::InitScheme::default_dcgan, "init",
                    "default_dcgan initializes conv layers only; the intro model has dense layers");
            require(loss == LossKind::bce || loss == LossKind::mse, "loss", "intro model trains with bce or mse");
            break;
        case ModelKind::dcgan:
            require(height == width && height >= 8 && is_power_of_two(height), "height",
                    "dcgan needs square images with a power-of-two side of at least 8");
            require(g_features >= 1 && d_features >= 1, "g_features", "must be positive");
            require(loss == LossKind::bce || loss == LossKind::mse, "loss", "dcgan trains with bce or mse");
            break;
        case ModelKind::style:
            require(height == width && height >= 4 && is_power_of_two(height), "height",
                    "style model needs square images with a power-of-two side of at least 4");
            require(loss == LossKind::wgan_gp, "loss", "style model trains with wgan_gp");
            require(style_fmaps >= 1, "style_fmaps", "must be positive");
            require(mapping_layers >= 1, "mapping_layers", "must be positive");
            require(images_per_phase >= 1, "images_per_phase", "must be positive");
            require(ada_target > -1.0f && ada_target < 1.0f, "ada_target", "must lie in (-1, 1)");
            break;
    }
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "model") {
        model = wrap(key, [&] { return parse_model_kind(v); });
    } else if (key == "batch_size") {
        batch_size = parse_size(key, v);
    } else if (key == "channels") {
        channels = parse_size(key, v);
    } else if (key == "height") {
        height = parse_size(key, v);
    } else if (key == "width") {
        width = parse_size(key, v);
    } else if (key == "lr") {
        lr = parse_float(key, v);
    } else if (key == "beta1") {
        beta1 = parse_float(key, v);
    } else if (key == "beta2") {
        beta2 = parse_float(key, v);
    } else if (key == "eps") {
        eps = parse_float(key, v);
    } else if (key == "latent_dim") {
        latent_dim = parse_size(key, v);
    } else if (key == "epochs") {
        epochs = parse_size(key, v);
    } else if (key == "leaky_slope") {
        leaky_slope = parse_float(key, v);
    } else if (key == "init") {
        init = wrap(key, [&] { return nn::parse_init_scheme(v); });
    } else if (key == "normalize_mode") {
        normalize_mode = wrap(key, [&] { return parse_normalize_mode(v); });
    } else if (key == "label_smoothing") {
        if (v == "none") {
            label_smoothing.reset();
        } else {
            const auto comma = v.find(',');
            if (comma == std::string::npos) throw ConfigError(key, "label_smoothing: expected 'lo,hi' or none");
            label_smoothing = std::make_pair(parse_float(key, trim(v.substr(0, comma))),
                                             parse_float(key, trim(v.substr(comma + 1))));
        }
    } else if (key == "noisy_label_ratio") {
        if (v == "none") {
            noisy_label_ratio.reset();
        } else {
            noisy_label_ratio = parse_float(key, v);
        }
    } else if (key == "dropout") {
        dropout = parse_float(key, v);
    } else if (key == "loss") {
        loss = wrap(key, [&] { return parse_loss_kind(v); });
    } else if (key == "seed") {
        seed = parse_size(key, v);
    } else if (key == "grid_interval") {
        grid_interval = parse_size(key, v);
    } else if (key == "grid_samples") {
        grid_samples = parse_size(key, v);
    } else if (key == "g_features") {
        g_features = parse_size(key, v);
    } else if (key == "d_features") {
        d_features = parse_size(key, v);
    } else if (key == "style_fmaps") {
        style_fmaps = parse_size(key, v);
    } else if (key == "mapping_layers") {
        mapping_layers = parse_size(key, v);
    } else if (key == "images_per_phase") {
        images_per_phase = parse_size(key, v);
    } else if (key == "gp_lambda") {
        gp_lambda = parse_float(key, v);
    } else if (key == "ada") {
        ada = parse_bool(key, v);
    } else if (key == "ada_target") {
        ada_target = parse_float(key, v);
    } else {
        throw ConfigError(key, fmt::format("unknown config key '{}'", key));
    }
}

std::string TrainConfig::to_text() const {
    std::string out;
    auto line = [&](const char* key, const std::string& value) { out += fmt::format("{}={}\n", key, value); };
    auto num = [](float f) { return fmt::format("{}", f); };
    line("model", to_string(model));
    line("batch_size", std::to_string(batch_size));
    line("channels", std::to_string(channels));
    line("height", std::to_string(height));
    line("width", std::to_string(width));
    line("lr", num(lr));
    line("beta1", num(beta1));
    line("beta2", num(beta2));
    line("eps", num(eps));
    line("latent_dim", std::to_string(latent_dim));
    line("epochs", std::to_string(epochs));
    line("leaky_slope", num(leaky_slope));
    line("init", nn::to_string(init));
    line("normalize_mode", to_string(normalize_mode));
    line("label_smoothing",
         label_smoothing ? fmt::format("{},{}", label_smoothing->first, label_smoothing->second) : "none");
    line("noisy_label_ratio", noisy_label_ratio ? num(*noisy_label_ratio) : "none");
    line("dropout", num(dropout));
    line("loss", to_string(loss));
    line("seed", std::to_string(seed));
    line("grid_interval", std::to_string(grid_interval));
    line("grid_samples", std::to_string(grid_samples));
    line("g_features", std::to_string(g_features));
    line("d_features", std::to_string(d_features));
    line("style_fmaps", std::to_string(style_fmaps));
    line("mapping_layers", std::to_string(mapping_layers));
    line("images_per_phase", std::to_string(images_per_phase));
    line("gp_lambda", num(gp_lambda));
    line("ada", ada ? "true" : "false");
    line("ada_target", num(ada_target));
    return out;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(line, fmt::format("line {}: expected key=value, got '{}'", lineno, line));
        }
        base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

TrainConfig load_config(const fs::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void save_config(const fs::path& path, const TrainConfig& config) {
    const std::string text = config.to_text();
    write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::size_t batches_per_epoch(std::size_t total_images, std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    return (total_images + batch_size - 1) / batch_size;
}

// ---------------------------------------------------------------------------
// Loss history

void LossHistory::add(LossRecord record) {
    if (!records_.empty() && record.iter <= records_.back().iter) {
        throw std::invalid_argument(
            fmt::format("loss history: iter {} after {}", record.iter, records_.back().iter));
    }
    records_.push_back(record);
}

std::string LossHistory::to_csv() const {
    const bool ada = std::any_of(records_.begin(), records_.end(), [](const LossRecord& r) { return r.ada_p.has_value(); });
    std::string out = ada ? "iter,g_loss,d_loss,ada_p,ada_rt\n" : "iter,g_loss,d_loss\n";
    for (const auto& r : records_) {
        out += fmt::format("{},{},{}", r.iter, r.g_loss, r.d_loss);
        if (ada) {
            out += r.ada_p ? fmt::format(",{},{}", *r.ada_p, r.ada_rt.value_or(0.0f)) : ",,";
        }
        out += '\n';
    }
    return out;
}

void LossHistory::write_csv(const fs::path& path) const {
    const std::string text = to_csv();
    write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

LossHistory LossHistory::parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line.rfind("iter,g_loss,d_loss", 0) != 0) throw std::invalid_argument("loss csv: unexpected header");
    LossHistory h;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (cells.size() < 3) throw std::invalid_argument("loss csv: short row '" + line + "'");
        LossRecord r;
        r.iter = std::stoull(cells[0]);
        r.g_loss = std::stof(cells[1]);
        r.d_loss = std::stof(cells[2]);
        if (cells.size() >= 5 && !cells[3].empty()) {
            r.ada_p = std::stof(cells[3]);
            r.ada_rt = std::stof(cells[4]);
        }
        h.add(r);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Stabilization helpers

std::vector<float> smooth_labels(const std::vector<float>& labels, float lo, float hi, Rng& rng) {
    if (!(lo <= hi)) throw std::invalid_argument("smooth_labels: lo > hi");
    std::vector<float> out = labels;
    for (auto& v : out) {
        if (v != 1.0f) continue;
        v = lo == hi ? lo : rng.uniform(lo, hi);
    }
    return out;
}

SwappedBatches apply_swap(const Tensor& real, const Tensor& fake, const LabelSwap& swap) {
    if (real.ndim() < 1 || fake.ndim() < 1 || real.numel() / real.dim(0) != fake.numel() / fake.dim(0)) {
        throw ShapeError("noisy_labels: sample shapes differ");
    }
    const std::size_t per = real.numel() / real.dim(0);
    std::vector<float> r = real.to_vector(), f = fake.to_vector();
    for (const auto& [i, j] : swap.pairs) {
        if (i >= real.dim(0) || j >= fake.dim(0)) throw std::out_of_range("noisy_labels: swap index out of range");
        std::swap_ranges(r.begin() + static_cast<std::ptrdiff_t>(i * per),
                         r.begin() + static_cast<std::ptrdiff_t>((i + 1) * per),
                         f.begin() + static_cast<std::ptrdiff_t>(j * per));
    }
    return {Tensor::from(real.shape(), std::move(r)), Tensor::from(fake.shape(), std::move(f)), swap};
}

SwappedBatches noisy_labels(const Tensor& real, const Tensor& fake, float ratio, Rng& rng) {
    if (ratio < 0.0f || ratio > 1.0f) throw std::invalid_argument("noisy_labels: ratio outside [0, 1]");
    const std::size_t n = real.dim(0);
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n))),
                                             std::min(n, fake.dim(0)));
    LabelSwap swap;
    const auto ri = rng.permutation(n);
    const auto fi = rng.permutation(fake.dim(0));
    for (std::size_t k = 0; k < count; ++k) swap.pairs.emplace_back(ri[k], fi[k]);
    return apply_swap(real, fake, swap);
}

std::optional<std::size_t> detect_divergence(const LossHistory& history, std::size_t window, float factor) {
    if (window == 0) throw std::invalid_argument("detect_divergence: window must be positive");
    const auto& rs = history.records();
    if (rs.size() < window) return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += rs[i].g_loss;
    double best = acc / static_cast<double>(window);
    for (std::size_t end = window; end < rs.size(); ++end) {
        acc += rs[end].g_loss - rs[end - window].g_loss;
        const double m = acc / static_cast<double>(window);
        if (m > factor * best) return rs[end].iter;
        best = std::min(best, m);
    }
    return std::nullopt;
}

float detect_mode_collapse(const Tensor& samples, OutputRange range) {
    if (samples.ndim() < 2) throw ShapeError("detect_mode_collapse: expected [N, ...]");
    const std::size_t n = samples.dim(0);
    if (n < 2) throw std::invalid_argument("detect_mode_collapse: need at least 2 samples");
    const std::size_t d = samples.numel() / n;
    const auto x = samples.data();
    std::vector<double> v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = range == OutputRange::unit ? 2.0 * x[i] - 1.0 : x[i];
    std::vector<double> norms(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) norms[i] += v[i * d + k] * v[i * d + k];
    for (auto& s : norms) s = std::sqrt(s);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j, ++pairs) {
            double sim;
            if (norms[i] == 0.0 || norms[j] == 0.0) {
                sim = norms[i] == norms[j] ? 1.0 : 0.0;
            } else {
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += v[i * d + k] * v[j * d + k];
                sim = dot / (norms[i] * norms[j]);
            }
            total += std::clamp(sim, 0.0, 1.0);
        }
    return static_cast<float>(total / static_cast<double>(pairs));
}

// ---------------------------------------------------------------------------
// Models

namespace {

Activation output_activation(const TrainConfig& c) {
    return c.normalize_mode == NormalizeMode::unit ? Activation::sigmoid() : Activation::tanh();
}

// Hidden layers use the configured scheme; with He the last layer falls back
// to normalized Xavier because it feeds a sigmoid/tanh.
nn::InitScheme last_layer_init(nn::InitScheme s) {
    return s == nn::InitScheme::he ? nn::InitScheme::xavier_normalized : s;
}

}  // namespace

std::vector<LayerSpec> intro_generator_specs(const TrainConfig& c) {
    const auto leaky = Activation::leaky_relu(c.leaky_slope);
    const std::size_t h = c.height / 4, w = c.width / 4;
    return {
        LayerSpec::dense(c.latent_dim, 128 * h * w, leaky, c.init, {128, h, w}),
        LayerSpec::conv_transpose(128, 128, 4, 2, 1, leaky, c.init),
        LayerSpec::conv_transpose(128, 128, 4, 2, 1, leaky, c.init),
        LayerSpec::conv(128, c.channels, 7, 1, 3, output_activation(c), last_layer_init(c.init)),
    };
}

std::vector<LayerSpec> intro_discriminator_specs(const TrainConfig& c) {
    const auto leaky = Activation::leaky_relu(c.leaky_slope);
    std::vector<LayerSpec> specs;
    specs.push_back(LayerSpec::conv(c.channels, 64, 3, 2, 1, leaky, c.init));
    if (c.dropout > 0.0f) specs.push_back(LayerSpec::dropout(c.dropout));
    specs.push_back(LayerSpec::conv(64, 64, 3, 2, 1, leaky, c.init));
    if (c.dropout > 0.0f) specs.push_back(LayerSpec::dropout(c.dropout));
    specs.push_back(LayerSpec::dense(64 * (c.height / 4) * (c.width / 4), 1, Activation::sigmoid(),
                                     last_layer_init(c.init)));
    return specs;
}

namespace {

std::size_t upsampling_stages(const TrainConfig& c) {
    std::size_t k = 0;
    for (std::size_t s = 4; s < c.height; s *= 2) ++k;
    return k;
}

}  // namespace

std::vector<LayerSpec> dcgan_generator_specs(const TrainConfig& c) {
    const std::size_t k = upsampling_stages(c);
    const auto relu = Activation::relu();
    std::vector<LayerSpec> specs;
    std::size_t ch = c.g_features << (k - 1);
    specs.push_back(LayerSpec::conv_transpose(c.latent_dim, ch, 4, 1, 0, {}, c.init, false));
    specs.push_back(LayerSpec::batchnorm(ch, relu, c.init));
    for (std::size_t s = 1; s < k; ++s) {
        specs.push_back(LayerSpec::conv_transpose(ch, ch / 2, 4, 2, 1, {}, c.init, false));
        specs.push_back(LayerSpec::batchnorm(ch / 2, relu, c.init));
        ch /= 2;
    }
    specs.push_back(
        LayerSpec::conv_transpose(ch, c.channels, 4, 2, 1, output_activation(c), last_layer_init(c.init), false));
    return specs;
}

std::vector<LayerSpec> dcgan_discriminator_specs(const TrainConfig& c) {
    const std::size_t k = upsampling_stages(c);
    const auto leaky = Activation::leaky_relu(c.leaky_slope);
    std::vector<LayerSpec> specs;
    std::size_t ch = c.d_features;
    specs.push_back(LayerSpec::conv(c.channels, ch, 4, 2, 1, leaky, c.init, false));
    if (c.dropout > 0.0f) specs.push_back(LayerSpec::dropout(c.dropout));
    for (std::size_t s = 1; s < k; ++s) {
        specs.push_back(LayerSpec::conv(ch, ch * 2, 4, 2, 1, {}, c.init, false));
        specs.push_back(LayerSpec::batchnorm(ch * 2, leaky, c.init));
        if (c.dropout > 0.0f) specs.push_back(LayerSpec::dropout(c.dropout));
        ch *= 2;
    }
    specs.push_back(LayerSpec::conv(ch, 1, 4, 1, 0, Activation::sigmoid(), last_layer_init(c.init), false));
    return specs;
}

ConvGan::ConvGan(const TrainConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    if (config_.model == ModelKind::intro) {
        g_ = nn::Sequential(intro_generator_specs(config_), rng);
        d_ = nn::Sequential(intro_discriminator_specs(config_), rng);
    } else if (config_.model == ModelKind::dcgan) {
        g_ = nn::Sequential(dcgan_generator_specs(config_), rng);
        d_ = nn::Sequential(dcgan_discriminator_specs(config_), rng);
    } else {
        throw std::invalid_argument("ConvGan: style models are built by StyleGan");
    }
    range_ = config_.normalize_mode == NormalizeMode::unit ? OutputRange::unit : OutputRange::symmetric;
}

Tensor ConvGan::generate(const Tensor& z, nn::Mode mode, Rng& rng) {
    if (z.ndim() != 2 || z.dim(1) != config_.latent_dim) {
        throw ShapeError(fmt::format("generate: expected [N, {}], got {}", config_.latent_dim, to_string(z.shape())));
    }
    if (config_.model == ModelKind::dcgan) return g_.forward(reshape(z, {z.dim(0), z.dim(1), 1, 1}), mode, rng);
    return g_.forward(z, mode, rng);
}

Tensor ConvGan::discriminate(const Tensor& x, nn::Mode mode, Rng& rng) {
    const Shape expected{x.ndim() == 4 ? x.dim(0) : 0, config_.channels, config_.height, config_.width};
    if (x.shape() != expected) {
        throw ShapeError(fmt::format("discriminate: expected [N, {}, {}, {}], got {}", config_.channels,
                                     config_.height, config_.width, to_string(x.shape())));
    }
    const Tensor y = d_.forward(x, mode, rng);
    return reshape(y, {x.dim(0), 1});
}

std::vector<nn::NamedTensor> ConvGan::state() const {
    auto out = g_.state("g.");
    auto d = d_.state("d.");
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

void ConvGan::load_state(const std::vector<nn::NamedTensor>& arrays) {
    g_.load_state("g.", arrays);
    d_.load_state("d.", arrays);
}

Tensor sample_latents(std::size_t n, std::size_t dim, Rng& rng) {
    return Tensor::from({n, dim}, rng.normal_vector(n * dim));
}

fs::path config_path_for(const fs::path& checkpoint) {
    fs::path p = checkpoint;
    p.replace_extension(".cfg");
    return p;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// Independent streams derived from the run seed so that, e.g., enabling label
// smoothing does not shift the latent draws.
enum class Stream : std::uint64_t { init = 1, data = 2, latent = 3, dropout = 4, labels = 5, grid = 6 };

Rng stream_rng(std::uint64_t seed, Stream s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 e(seq);
    return Rng(e());
}

// Cycles through shuffled dataset indices; reshuffles when exhausted.
class RealSampler {
   public:
    RealSampler(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
    std::vector<std::size_t> next(std::size_t count) {
        std::vector<std::size_t> out;
        out.reserve(count);
        while (out.size() < count) {
            if (pos_ == order_.size()) {
                order_ = rng_.permutation(n_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

   private:
    std::size_t n_;
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

Tensor targets(std::size_t n, float value) { return Tensor::full({n, 1}, value); }

void write_grid(const Tensor& samples, OutputRange range, const fs::path& path) {
    const auto tiles = render_batch(samples, range);
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
    write_png(path, tile_grid(tiles, cols));
}

}  // namespace

TrainOutputs train_conv_gan(const TrainConfig& config, const Tensor& dataset, const fs::path& outdir,
                            const TrainHooks& hooks) {
    config.validate();
    if (dataset.ndim() != 4 || dataset.dim(1) != config.channels || dataset.dim(2) != config.height ||
        dataset.dim(3) != config.width) {
        throw ShapeError(fmt::format("train: dataset {} does not match config [N, {}, {}, {}]",
                                     to_string(dataset.shape()), config.channels, config.height, config.width));
    }
    const std::size_t total = dataset.dim(0);
    if (total == 0) throw std::invalid_argument("train: empty dataset");

    Rng init_rng = stream_rng(config.seed, Stream::init);
    Rng data_rng = stream_rng(config.seed, Stream::data);
    Rng latent_rng = stream_rng(config.seed, Stream::latent);
    Rng dropout_rng = stream_rng(config.seed, Stream::dropout);
    Rng label_rng = stream_rng(config.seed, Stream::labels);
    Rng grid_rng = stream_rng(config.seed, Stream::grid);

    ConvGan gan(config, init_rng);
    const AdamConfig adam{config.lr, config.beta1, config.beta2, config.eps};
    Adam opt_g(gan.generator().parameters(), adam);
    Adam opt_d(gan.discriminator().parameters(), adam);
    const Tensor grid_z = sample_latents(config.grid_samples, config.latent_dim, grid_rng);

    fs::create_directories(outdir / kCheckpointDir);
    fs::create_directories(outdir / kGridDir);

    TrainOutputs out;
    RealSampler sampler(total, data_rng);
    const std::size_t batches = batches_per_epoch(total, config.batch_size);
    const std::size_t half = config.batch_size / 2;
    const auto mode = nn::Mode::train;
    std::size_t iter = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches; ++b) {
            ++iter;
            float d_value = 0.0f, g_value = 0.0f;
            try {
                Tensor real = index_select(dataset, 0, sampler.next(half));
                Tensor fake;
                {
                    NoGradGuard no_grad;
                    fake = gan.generate(sample_latents(half, config.latent_dim, latent_rng), mode, dropout_rng);
                }
                if (config.noisy_label_ratio && *config.noisy_label_ratio > 0.0f) {
                    auto swapped = noisy_labels(real, fake, *config.noisy_label_ratio, label_rng);
                    real = swapped.real;
                    fake = swapped.fake;
                }
                std::vector<float> real_labels(half, 1.0f);
                if (config.label_smoothing) {
                    real_labels = smooth_labels(real_labels, config.label_smoothing->first,
                                                config.label_smoothing->second, label_rng);
                    // bce targets must stay in [0, 1].
                    for (auto& v : real_labels) v = std::min(v, 1.0f);
                }

                opt_d.zero_grad();
                const Tensor d_real = gan.discriminate(real, mode, dropout_rng);
                const Tensor d_fake = gan.discriminate(fake, mode, dropout_rng);
                const Tensor d_loss = loss(config.loss, d_real, Tensor::from({half, 1}, real_labels)) +
                                      loss(config.loss, d_fake, targets(half, 0.0f));
                backward(d_loss);
                opt_d.step();
                d_value = d_loss.item();

                opt_g.zero_grad();
                const Tensor z = sample_latents(config.batch_size, config.latent_dim, latent_rng);
                const Tensor verdict = gan.discriminate(gan.generate(z, mode, dropout_rng), mode, dropout_rng);
                const Tensor g_loss = loss(config.loss, verdict, targets(config.batch_size, 1.0f));
                backward(g_loss);
                opt_g.step();
                g_value = g_loss.item();
            } catch (const NonFiniteError& e) {
                throw TrainingError(fmt::format("non-finite value at epoch {} iteration {}: {}", epoch, iter, e.what()));
            }
            if (!std::isfinite(d_value) || !std::isfinite(g_value)) {
                throw TrainingError(fmt::format("non-finite loss at epoch {} iteration {}: g={} d={}", epoch, iter,
                                                g_value, d_value));
            }
            out.history.add(iter, g_value, d_value);
            out.reals_shown += half;
            if (hooks.on_iteration) hooks.on_iteration(out.history.records().back());
        }
        logging::info("epoch {}/{}: g_loss={:.4f} d_loss={:.4f}", epoch, config.epochs,
                  out.history.records().back().g_loss, out.history.records().back().d_loss);

        const fs::path ckpt = outdir / kCheckpointDir / fmt::format("epoch_{:04d}.ckpt", epoch);
        save_checkpoint(ckpt, gan.state());
        save_config(config_path_for(ckpt), config);
        out.checkpoints.push_back(ckpt);

        if ((config.grid_interval > 0 && epoch % config.grid_interval == 0) || epoch == config.epochs) {
            Tensor samples;
            {
                NoGradGuard no_grad;
                Rng eval_rng(0);
                samples = gan.generate(grid_z, nn::Mode::eval, eval_rng);
            }
            const fs::path grid = outdir / kGridDir / fmt::format("epoch_{:04d}.png", epoch);
            write_grid(samples, gan.output_range(), grid);
            out.grids.push_back(grid);
            if (samples.dim(0) >= 2) out.collapse_score = detect_mode_collapse(samples, gan.output_range());
        }
    }

    out.history.write_csv(outdir / kLossCsv);
    save_checkpoint(outdir / kNetworkFile, gan.state());
    save_config(config_path_for(outdir / kNetworkFile), config);
    return out;
}

}  // namespace albumgan
