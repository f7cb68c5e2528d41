#include "albumgan/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace albumgan::nn {

InitScheme parse_init_scheme(const std::string& name) {
    if (name == "default_dcgan" || name == "default") return InitScheme::default_dcgan;
    if (name == "he") return InitScheme::he;
    if (name == "xavier_normalized" || name == "xavier") return InitScheme::xavier_normalized;
    throw std::invalid_argument("unknown init scheme '" + name + "'");
}

std::string to_string(InitScheme scheme) {
    switch (scheme) {
        case InitScheme::default_dcgan:
            return "default_dcgan";
        case InitScheme::he:
            return "he";
        case InitScheme::xavier_normalized:
            return "xavier_normalized";
    }
    return "?";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act, InitScheme init, Shape reshape_to) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in = in;
    s.out = out;
    s.activation = act;
    s.init = init;
    s.reshape_to = std::move(reshape_to);
    return s;
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t padding, Activation act, InitScheme init, bool bias) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.in = in;
    s.out = out;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    s.activation = act;
    s.init = init;
    s.bias = bias;
    return s;
}

LayerSpec LayerSpec::conv_transpose(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                    std::size_t padding, Activation act, InitScheme init, bool bias) {
    LayerSpec s = conv(in, out, kernel, stride, padding, act, init, bias);
    s.kind = LayerKind::conv_transpose;
    return s;
}

LayerSpec LayerSpec::batchnorm(std::size_t channels, Activation act, InitScheme init) {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    s.in = s.out = channels;
    s.activation = act;
    s.init = init;
    return s;
}

LayerSpec LayerSpec::dropout(float rate) {
    if (!(rate >= 0.0f && rate < 1.0f)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.dropout_rate = rate;
    s.bias = false;
    return s;
}

InitSpec LayerSpec::init_spec() const {
    const std::size_t area = kernel * kernel;
    switch (kind) {
        case LayerKind::dense:
            return {init, in, out};
        case LayerKind::conv:
            return {init, in * area, out * area};
        case LayerKind::conv_transpose:
            // Kernel is stored [in, out, k, k]; fans follow the stored layout.
            return {init, out * area, in * area};
        case LayerKind::batchnorm:
        case LayerKind::dropout:
            return {init, std::max<std::size_t>(in, 1), std::max<std::size_t>(out, 1)};
    }
    return {};
}

float he_std(std::size_t fan_in) {
    if (fan_in == 0) throw std::invalid_argument("fan_in must be positive");
    return static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in)));
}

float xavier_bound(std::size_t fan_in, std::size_t fan_out) {
    if (fan_in == 0 || fan_out == 0) throw std::invalid_argument("fan_in and fan_out must be positive");
    return static_cast<float>(std::sqrt(6.0) / std::sqrt(static_cast<double>(fan_in + fan_out)));
}

void fill_normal(Tensor& t, float mean, float stddev, Rng& rng) {
    for (auto& v : t.mutable_data()) v = rng.normal(mean, stddev);
}

void fill_uniform(Tensor& t, float lo, float hi, Rng& rng) {
    for (auto& v : t.mutable_data()) {
        // uniform_real_distribution can round up to hi in float; redraw.
        do {
            v = rng.uniform(lo, hi);
        } while (v >= hi);
    }
}

void fill_constant(Tensor& t, float value) {
    for (auto& v : t.mutable_data()) v = value;
}

void init_he(Tensor& weights, std::size_t fan_in, Rng& rng) { fill_normal(weights, 0.0f, he_std(fan_in), rng); }

void init_xavier_normalized(Tensor& weights, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const float b = xavier_bound(fan_in, fan_out);
    fill_uniform(weights, -b, b, rng);
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& scale, const Tensor& shift, Mode mode,
                         BatchNormStats* running, float eps, float momentum) {
    if (x.ndim() != 2 && x.ndim() != 4) throw ShapeError("batchnorm: expected [N,C] or [N,C,H,W]");
    const std::size_t channels = x.dim(1);
    if (scale.numel() != channels || shift.numel() != channels) {
        throw ShapeError("batchnorm: scale/shift size does not match channel count");
    }
    Shape param_shape(x.ndim(), 1);
    param_shape[1] = channels;
    std::vector<std::size_t> axes{0};
    if (x.ndim() == 4) axes = {0, 2, 3};
    const std::size_t count = x.numel() / channels;

    Tensor s = reshape(scale, param_shape);
    Tensor b = reshape(shift, param_shape);

    if (mode == Mode::eval) {
        if (running == nullptr || running->mean.size() != channels) {
            throw std::invalid_argument("batchnorm: eval mode needs running statistics");
        }
        std::vector<float> inv(channels);
        for (std::size_t c = 0; c < channels; ++c) inv[c] = 1.0f / std::sqrt(running->var[c] + eps);
        Tensor m = Tensor::from(param_shape, running->mean);
        Tensor is = Tensor::from(param_shape, inv);
        return add(mul(mul(sub(x, m), is), s), b);
    }

    if (count < 2) throw std::invalid_argument("batchnorm: train mode needs more than one value per channel");
    Tensor mu = mean(x, axes, true);
    Tensor centered = sub(x, mu);
    Tensor var = mean(square(centered), axes, true);
    Tensor normalized = div(centered, sqrt(add(var, eps)));

    if (running != nullptr) {
        if (running->mean.size() != channels) {
            running->mean.assign(channels, 0.0f);
            running->var.assign(channels, 1.0f);
        }
        auto mu_d = mu.data();
        auto var_d = var.data();
        const float unbias = static_cast<float>(count) / static_cast<float>(count - 1);
        for (std::size_t c = 0; c < channels; ++c) {
            running->mean[c] = (1.0f - momentum) * running->mean[c] + momentum * mu_d[c];
            running->var[c] = (1.0f - momentum) * running->var[c] + momentum * var_d[c] * unbias;
        }
    }
    return add(mul(normalized, s), b);
}

Tensor dropout_forward(const Tensor& x, float rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0f && rate < 1.0f)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
    if (mode == Mode::eval || rate == 0.0f) return x;
    const float keep_scale = 1.0f / (1.0f - rate);
    std::vector<float> mask(x.numel());
    for (auto& m : mask) m = rng.bernoulli(rate) ? 0.0f : keep_scale;
    return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Layer::Layer(LayerSpec spec, Rng& rng) : spec_(std::move(spec)) {
    const std::size_t k = spec_.kernel;
    switch (spec_.kind) {
        case LayerKind::dense:
            weight_ = Tensor::zeros({spec_.in, spec_.out});
            if (spec_.bias) bias_ = Tensor::zeros({spec_.out});
            break;
        case LayerKind::conv:
            weight_ = Tensor::zeros({spec_.out, spec_.in, k, k});
            if (spec_.bias) bias_ = Tensor::zeros({spec_.out});
            break;
        case LayerKind::conv_transpose:
            weight_ = Tensor::zeros({spec_.in, spec_.out, k, k});
            if (spec_.bias) bias_ = Tensor::zeros({spec_.out});
            break;
        case LayerKind::batchnorm:
            weight_ = Tensor::ones({spec_.in});
            bias_ = Tensor::zeros({spec_.in});
            running_.mean.assign(spec_.in, 0.0f);
            running_.var.assign(spec_.in, 1.0f);
            break;
        case LayerKind::dropout:
            return;
    }
    weight_.set_requires_grad();
    if (bias_.defined()) bias_.set_requires_grad();
    initialize(*this, spec_.init, rng);
}

Tensor Layer::forward(const Tensor& x, Mode mode, Rng& rng) {
    Tensor y;
    switch (spec_.kind) {
        case LayerKind::dense: {
            Tensor flat = x.ndim() == 2 ? x : flatten(x);
            y = matmul(flat, weight_);
            if (bias_.defined()) y = add(y, bias_);
            if (!spec_.reshape_to.empty()) {
                Shape target{x.dim(0)};
                target.insert(target.end(), spec_.reshape_to.begin(), spec_.reshape_to.end());
                y = reshape(y, target);
            }
            break;
        }
        case LayerKind::conv:
            y = conv2d(x, weight_, spec_.stride, spec_.padding);
            if (bias_.defined()) y = add(y, reshape(bias_, {1, spec_.out, 1, 1}));
            break;
        case LayerKind::conv_transpose:
            y = conv_transpose2d(x, weight_, spec_.stride, spec_.padding);
            if (bias_.defined()) y = add(y, reshape(bias_, {1, spec_.out, 1, 1}));
            break;
        case LayerKind::batchnorm:
            y = batchnorm_forward(x, weight_, bias_, mode, &running_);
            break;
        case LayerKind::dropout:
            y = dropout_forward(x, spec_.dropout_rate, mode, rng);
            break;
    }
    return activation(spec_.activation, y);
}

std::vector<NamedTensor> Layer::parameters(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    if (weight_.defined()) out.push_back({prefix + "weight", weight_});
    if (bias_.defined()) out.push_back({prefix + "bias", bias_});
    return out;
}

std::vector<NamedTensor> Layer::state(const std::string& prefix) const {
    auto out = parameters(prefix);
    if (spec_.kind == LayerKind::batchnorm) {
        out.push_back({prefix + "running_mean", Tensor::from({running_.mean.size()}, running_.mean)});
        out.push_back({prefix + "running_var", Tensor::from({running_.var.size()}, running_.var)});
    }
    return out;
}

namespace {

void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
    if (dst.shape() != src.shape()) {
        throw ShapeError("checkpoint array '" + name + "' has shape " + albumgan::to_string(src.shape()) + ", expected " +
                         albumgan::to_string(dst.shape()));
    }
    auto d = dst.mutable_data();
    auto s = src.data();
    std::copy(s.begin(), s.end(), d.begin());
}

}  // namespace

const Tensor& find_named(const std::vector<NamedTensor>& arrays, const std::string& name) {
    for (const auto& a : arrays) {
        if (a.name == name) return a.tensor;
    }
    throw std::runtime_error("missing array '" + name + "'");
}

void Layer::load_state(const std::string& prefix, const std::vector<NamedTensor>& arrays) {
    if (weight_.defined()) copy_into(weight_, find_named(arrays, prefix + "weight"), prefix + "weight");
    if (bias_.defined()) copy_into(bias_, find_named(arrays, prefix + "bias"), prefix + "bias");
    if (spec_.kind == LayerKind::batchnorm) {
        running_.mean = find_named(arrays, prefix + "running_mean").to_vector();
        running_.var = find_named(arrays, prefix + "running_var").to_vector();
    }
}

void init_default_dcgan(Layer& layer, Rng& rng) {
    switch (layer.spec().kind) {
        case LayerKind::conv:
        case LayerKind::conv_transpose:
            fill_normal(layer.weight(), 0.0f, 0.02f, rng);
            if (layer.bias().defined()) fill_constant(layer.bias(), 0.0f);
            return;
        case LayerKind::batchnorm:
            fill_normal(layer.weight(), 1.0f, 0.02f, rng);
            fill_constant(layer.bias(), 0.0f);
            return;
        case LayerKind::dense:
        case LayerKind::dropout:
            break;
    }
    throw std::invalid_argument("default DCGAN initialization supports conv, conv_transpose and batchnorm only");
}

void initialize(Layer& layer, InitScheme scheme, Rng& rng) {
    const LayerKind kind = layer.spec().kind;
    if (kind == LayerKind::dropout) return;
    if (scheme == InitScheme::default_dcgan) {
        init_default_dcgan(layer, rng);
        return;
    }
    if (kind == LayerKind::batchnorm) {
        fill_constant(layer.weight(), 1.0f);
        fill_constant(layer.bias(), 0.0f);
        return;
    }
    const InitSpec fans = layer.spec().init_spec();
    if (scheme == InitScheme::he) {
        init_he(layer.weight(), fans.fan_in, rng);
    } else {
        init_xavier_normalized(layer.weight(), fans.fan_in, fans.fan_out, rng);
    }
    if (layer.bias().defined()) fill_constant(layer.bias(), 0.0f);
}

Sequential::Sequential(const std::vector<LayerSpec>& specs, Rng& rng) {
    layers_.reserve(specs.size());
    for (const auto& s : specs) layers_.emplace_back(s, rng);
}

Tensor Sequential::forward(const Tensor& x, Mode mode, Rng& rng) {
    Tensor y = x;
    for (auto& l : layers_) y = l.forward(y, mode, rng);
    return y;
}

std::vector<Tensor> Sequential::parameters() const {
    std::vector<Tensor> out;
    for (const auto& np : named_parameters("")) out.push_back(np.tensor);
    return out;
}

std::vector<NamedTensor> Sequential::named_parameters(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto p = layers_[i].parameters(prefix + std::to_string(i) + ".");
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<NamedTensor> Sequential::state(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto p = layers_[i].state(prefix + std::to_string(i) + ".");
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

void Sequential::load_state(const std::string& prefix, const std::vector<NamedTensor>& arrays) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].load_state(prefix + std::to_string(i) + ".", arrays);
}

}  // namespace albumgan::nn
