#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace albumgan {

class ImageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// 8-bit interleaved pixels, row-major, 1 (gray) or 3 (RGB) channels.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c) : width(w), height(h), channels(c), pixels(w * h * c, 0) {}

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

/// Decodes PNG or JPEG (detected from the leading bytes). Alpha is dropped;
/// gray images stay single-channel.
Image decode_image(const std::vector<std::uint8_t>& bytes);
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);
std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality = 90);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Gray is replicated into R, G and B; RGB is returned unchanged.
Image to_rgb(const Image& image);

inline constexpr const char* kResizeFilter = "lanczos3";

/// Separable Lanczos (a = 3) resampling; the kernel widens when downscaling.
Image resize_lanczos(const Image& image, std::size_t width, std::size_t height);

/// Tiles equally sized images into a rows x cols grid separated by `pad` pixels.
Image tile_grid(const std::vector<Image>& tiles, std::size_t cols, std::size_t pad = 2);

}  // namespace albumgan
