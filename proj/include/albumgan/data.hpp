#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "albumgan/image.hpp"
#include "albumgan/rng.hpp"
#include "albumgan/tensor.hpp"

namespace albumgan {

/// Per-channel statistics of pixels scaled to [0, 1].
struct ChannelStats {
    std::vector<float> mean;
    std::vector<float> std;
    // Set when some channel has (numerically) zero spread.
    bool degenerate = false;

    std::size_t channels() const { return mean.size(); }
    static ChannelStats uniform(std::size_t channels, float mean, float std);
};

inline constexpr float kDegenerateStd = 1e-6f;
inline constexpr std::size_t kStatsBatchSize = 64;

/// Mean of per-batch channel means of x and x^2 (images in file order), then
/// std = sqrt(E[x^2] - E[x]^2).
ChannelStats channel_stats(const std::vector<Image>& images, std::size_t batch_size = kStatsBatchSize);

/// (x/255 - mean) / std per channel, returned channel-major [C, H, W].
std::vector<float> normalize(const Image& image, const ChannelStats& stats);
/// Inverse of normalize, rounded to the nearest integer and clamped to [0, 255].
Image denormalize(std::span<const float> chw, std::size_t width, std::size_t height, const ChannelStats& stats);

enum class NormalizeMode { hardcoded_half, computed_stats, unit };

NormalizeMode parse_normalize_mode(const std::string& name);
std::string to_string(NormalizeMode mode);

/// Stats for a mode: 0.5/0.5, the given dataset stats, or 0/1 (plain x/255).
ChannelStats stats_for(NormalizeMode mode, std::size_t channels, const std::optional<ChannelStats>& computed);

/// Generator output to pixels. tanh outputs use clamp(x*127.5 + 128); sigmoid
/// outputs use clamp(x*255 + 0.5).
enum class OutputRange { symmetric, unit };
Image render_sample(std::span<const float> chw, std::size_t channels, std::size_t height, std::size_t width,
                    OutputRange range);
std::vector<Image> render_batch(const Tensor& batch, OutputRange range);

/// Gray -> RGB by replication or RGB -> gray by ITU-R 601 luma.
Image convert_channels(const Image& image, std::size_t channels);

struct ImageSet {
    std::vector<std::string> ids;
    std::vector<Image> images;
    std::size_t size() const { return images.size(); }
};

/// PNG and JPEG files of a directory in lexicographic filename order,
/// converted to `channels`. Unreadable files are skipped with a warning.
ImageSet load_image_dir(const std::filesystem::path& dir, std::size_t channels);

/// Stacks normalized images into [B, C, H, W].
Tensor to_batch(const std::vector<Image>& images, std::span<const std::size_t> indices, const ChannelStats& stats);

struct DatasetMetadata {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t count = 0;
    std::optional<ChannelStats> stats;
    std::string filter = kResizeFilter;
};

inline constexpr const char* kDatasetMetadataFile = "dataset.json";

void write_metadata(const std::filesystem::path& path, const DatasetMetadata& meta);
DatasetMetadata read_metadata(const std::filesystem::path& path);

struct PrepareResult {
    std::size_t written = 0;
    std::vector<std::string> skipped;
};

/// Resizes every readable image of src_dir to width x height RGB and writes
/// <stem>.png into dest_dir plus the metadata sidecar.
PrepareResult prepare_dataset(const std::filesystem::path& src_dir, const std::filesystem::path& dest_dir,
                              std::size_t width, std::size_t height);

enum class FixtureStyle { covers, strokes };

/// Procedural images for tests and demos: `covers` are colored gradients
/// with shapes, `strokes` are bright pen strokes on black (digit-like).
std::vector<Image> fixture_images(std::size_t count, std::size_t width, std::size_t height, std::size_t channels,
                                  FixtureStyle style, std::uint64_t seed);

}  // namespace albumgan
