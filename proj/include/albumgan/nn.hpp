#pragma once

#include <string>
#include <utility>
#include <vector>

#include "albumgan/ops.hpp"
#include "albumgan/rng.hpp"
#include "albumgan/tensor.hpp"

namespace albumgan::nn {

enum class InitScheme { default_dcgan, he, xavier_normalized };

InitScheme parse_init_scheme(const std::string& name);
std::string to_string(InitScheme scheme);

/// Fan-in n_l ("inputs to the node") and fan-out m_l of a layer.
struct InitSpec {
    InitScheme scheme = InitScheme::xavier_normalized;
    std::size_t fan_in = 1;
    std::size_t fan_out = 1;
};

enum class LayerKind { dense, conv, conv_transpose, batchnorm, dropout };
enum class Mode { train, eval };

inline constexpr float kBatchNormEpsilon = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.1f;

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    // Features for dense layers, channels for the others.
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    bool bias = true;
    Activation activation;
    InitScheme init = InitScheme::xavier_normalized;
    float dropout_rate = 0.0f;
    // Dense only: per-sample output shape, e.g. {128, 7, 7}.
    Shape reshape_to;

    static LayerSpec dense(std::size_t in, std::size_t out, Activation act = {},
                           InitScheme init = InitScheme::xavier_normalized, Shape reshape_to = {});
    static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t padding, Activation act = {},
                          InitScheme init = InitScheme::xavier_normalized, bool bias = true);
    static LayerSpec conv_transpose(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                    std::size_t padding, Activation act = {},
                                    InitScheme init = InitScheme::xavier_normalized, bool bias = true);
    static LayerSpec batchnorm(std::size_t channels, Activation act = {},
                               InitScheme init = InitScheme::xavier_normalized);
    static LayerSpec dropout(float rate);

    InitSpec init_spec() const;
};

float he_std(std::size_t fan_in);
float xavier_bound(std::size_t fan_in, std::size_t fan_out);

void fill_normal(Tensor& t, float mean, float stddev, Rng& rng);
void fill_uniform(Tensor& t, float lo, float hi, Rng& rng);
void fill_constant(Tensor& t, float value);

/// Weights ~ N(0, 2/n_l).
void init_he(Tensor& weights, std::size_t fan_in, Rng& rng);
/// Weights ~ U(-b, b) with b = sqrt(6) / sqrt(n_l + m_l).
void init_xavier_normalized(Tensor& weights, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct BatchNormStats {
    std::vector<float> mean;
    std::vector<float> var;
};

/// Standardizes over every axis except 1 (channels). Train mode uses batch
/// statistics and updates `running` with momentum 0.1; eval mode uses `running`.
Tensor batchnorm_forward(const Tensor& x, const Tensor& scale, const Tensor& shift, Mode mode,
                         BatchNormStats* running = nullptr, float eps = kBatchNormEpsilon,
                         float momentum = kBatchNormMomentum);

/// Inverted dropout: train mode zeroes with probability `rate` and rescales
/// survivors by 1/(1-rate); eval mode is the identity.
Tensor dropout_forward(const Tensor& x, float rate, Mode mode, Rng& rng);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

class Layer {
   public:
    Layer(LayerSpec spec, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode, Rng& rng);

    const LayerSpec& spec() const { return spec_; }
    Tensor& weight() { return weight_; }
    Tensor& bias() { return bias_; }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    BatchNormStats& running() { return running_; }
    const BatchNormStats& running() const { return running_; }

    std::vector<NamedTensor> parameters(const std::string& prefix) const;
    // Parameters plus running statistics.
    std::vector<NamedTensor> state(const std::string& prefix) const;
    void load_state(const std::string& prefix, const std::vector<NamedTensor>& arrays);

   private:
    LayerSpec spec_;
    Tensor weight_;
    Tensor bias_;
    BatchNormStats running_;
};

/// N(0, 0.02) conv weights; N(1, 0.02) batchnorm scale with zero shift.
void init_default_dcgan(Layer& layer, Rng& rng);
/// Re-initializes a layer with the given scheme.
void initialize(Layer& layer, InitScheme scheme, Rng& rng);

class Sequential {
   public:
    Sequential() = default;
    Sequential(const std::vector<LayerSpec>& specs, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode, Rng& rng);

    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return layers_.at(i); }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }

    std::vector<Tensor> parameters() const;
    std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
    std::vector<NamedTensor> state(const std::string& prefix) const;
    void load_state(const std::string& prefix, const std::vector<NamedTensor>& arrays);

   private:
    std::vector<Layer> layers_;
};

const Tensor& find_named(const std::vector<NamedTensor>& arrays, const std::string& name);

}  // namespace albumgan::nn
