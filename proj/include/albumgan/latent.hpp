#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "albumgan/image.hpp"
#include "albumgan/style.hpp"

namespace albumgan {

/// lam * b + (1 - lam) * a, elementwise.
StyleVector interpolate(const StyleVector& a, const StyleVector& b, float lam);

/// Elementwise mean.
StyleVector average(const std::vector<StyleVector>& vectors);

/// Rows [0, k) from b, rows [k, num_styles) from a.
StyleVector style_mix(const StyleVector& a, const StyleVector& b, std::size_t k);

/// Full-resolution render of one style vector.
Image render(const StyleGenerator& g, const StyleVector& w);

/// `divisions` frames at lam = i / divisions, i = 0 .. divisions-1.
std::vector<Image> interpolation_sequence(const StyleGenerator& g, const StyleVector& a, const StyleVector& b,
                                          std::size_t divisions);

struct MixingGrid {
    std::size_t k = 0;
    std::vector<std::string> labels;
    // tiles[i][j] = render(style_mix(w_i, w_j, k)).
    std::vector<std::vector<Image>> tiles;
    Image image;
};

MixingGrid mixing_grid(const std::vector<StyleVector>& sources, std::size_t k, const StyleGenerator& g,
                       std::vector<std::string> labels = {});

/// Writes the grid PNG and a JSON sidecar (same stem, ".json") with row and
/// column source labels.
void write_mixing_grid(const std::filesystem::path& png, const MixingGrid& grid);

inline constexpr std::size_t kDefaultProjectionSteps = 600;

struct ProjectOptions {
    std::size_t steps = kDefaultProjectionSteps;
    float lr = 0.1f;
    float rampdown = 0.25f;
    float rampup = 0.05f;
    std::size_t mean_samples = 1000;
    std::uint64_t seed = 0;
    // Starting point; defaults to the mapper's mean w in every row.
    std::optional<StyleVector> init;
};

struct ProjectionRun {
    std::size_t steps = 0;
    // Loss before each update; size == steps.
    std::vector<float> loss_trace;
    StyleVector w;
};

/// Learning-rate multiplier at fraction t of the run: cosine ramp-down over the
/// last `rampdown` and linear ramp-up over the first `rampup`.
float projection_lr_scale(float t, float rampdown, float rampup);

/// Optimizes w to reconstruct `target` ([1, C, R, R] or [C, R, R] in [-1, 1])
/// under pixel MSE with Adam.
ProjectionRun project(const Tensor& target, const StyleGenerator& g, const ProjectOptions& options = {});

/// Converts an image to a [1, C, R, R] target in [-1, 1] for the generator.
Tensor projection_target(const Image& image, const StyleConfig& config);

}  // namespace albumgan
