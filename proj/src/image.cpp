#include "albumgan/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>

namespace albumgan {

namespace {

bool is_png(const std::vector<std::uint8_t>& b) {
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

bool is_jpeg(const std::vector<std::uint8_t>& b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw ImageError(std::string("png: ") + img.message);
    }
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Image out(img.width, img.height, color ? 3 : 1);
    // Alpha is composited onto black by the simplified API when no background is given.
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw ImageError(std::string("png: ") + img.message);
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
    auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
    (*info->err->format_message)(info, err->message);
    std::longjmp(err->jump, 1);
}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes) {
    jpeg_decompress_struct info;
    JpegErrorManager err;
    info.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    Image out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&info);
        throw ImageError(std::string("jpeg: ") + err.message);
    }
    jpeg_create_decompress(&info);
    jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&info, TRUE);
    const bool gray = info.jpeg_color_space == JCS_GRAYSCALE;
    info.out_color_space = gray ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&info);
    out = Image(info.output_width, info.output_height, gray ? 1 : 3);
    const std::size_t stride = out.width * out.channels;
    while (info.output_scanline < info.output_height) {
        JSAMPROW row = out.pixels.data() + info.output_scanline * stride;
        jpeg_read_scanlines(&info, &row, 1);
    }
    jpeg_finish_decompress(&info);
    jpeg_destroy_decompress(&info);
    return out;
}

double lanczos3(double x) {
    x = std::abs(x);
    if (x < 1e-12) return 1.0;
    if (x >= 3.0) return 0.0;
    const double px = std::numbers::pi * x;
    return 3.0 * std::sin(px) * std::sin(px / 3.0) / (px * px);
}

struct Taps {
    std::size_t first;
    std::vector<double> weights;
};

// Per output sample, the contributing input range and normalized weights.
std::vector<Taps> resample_taps(std::size_t in, std::size_t out) {
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double filter_scale = std::max(scale, 1.0);
    const double support = 3.0 * filter_scale;
    std::vector<Taps> taps(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double center = (static_cast<double>(i) + 0.5) * scale;
        const auto lo = static_cast<long>(std::max(0.0, std::floor(center - support)));
        const auto hi = static_cast<long>(std::min(static_cast<double>(in), std::ceil(center + support)));
        Taps& t = taps[i];
        t.first = static_cast<std::size_t>(lo);
        double total = 0.0;
        for (long j = lo; j < hi; ++j) {
            const double w = lanczos3((static_cast<double>(j) + 0.5 - center) / filter_scale);
            t.weights.push_back(w);
            total += w;
        }
        for (auto& w : t.weights) w /= total;
    }
    return taps;
}

}  // namespace

Image decode_image(const std::vector<std::uint8_t>& bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    throw ImageError("unrecognized image format");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Image read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.channels != 1 && image.channels != 3) throw ImageError("png: expected 1 or 3 channels");
    if (image.pixels.size() != image.width * image.height * image.channels) throw ImageError("png: pixel count");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw ImageError(std::string("png: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw ImageError(std::string("png: ") + img.message);
    }
    out.resize(size);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image) { write_file(path, encode_png(image)); }

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality) {
    if (image.channels != 1 && image.channels != 3) throw ImageError("jpeg: expected 1 or 3 channels");
    jpeg_compress_struct info;
    JpegErrorManager err;
    info.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&info);
        std::free(buffer);
        throw ImageError(std::string("jpeg: ") + err.message);
    }
    jpeg_create_compress(&info);
    jpeg_mem_dest(&info, &buffer, &size);
    info.image_width = static_cast<JDIMENSION>(image.width);
    info.image_height = static_cast<JDIMENSION>(image.height);
    info.input_components = static_cast<int>(image.channels);
    info.in_color_space = image.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_set_defaults(&info);
    jpeg_set_quality(&info, quality, TRUE);
    jpeg_start_compress(&info, TRUE);
    const std::size_t stride = image.width * image.channels;
    while (info.next_scanline < info.image_height) {
        auto* row = const_cast<JSAMPLE*>(image.pixels.data() + info.next_scanline * stride);
        jpeg_write_scanlines(&info, &row, 1);
    }
    jpeg_finish_compress(&info);
    std::vector<std::uint8_t> out(buffer, buffer + size);
    jpeg_destroy_compress(&info);
    std::free(buffer);
    return out;
}

Image to_rgb(const Image& image) {
    if (image.channels == 3) return image;
    if (image.channels != 1) throw ImageError("to_rgb: unsupported channel count");
    Image out(image.width, image.height, 3);
    for (std::size_t i = 0; i < image.width * image.height; ++i)
        for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = image.pixels[i];
    return out;
}

Image resize_lanczos(const Image& image, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw ImageError("resize: empty target");
    if (image.width == width && image.height == height) return image;
    const std::size_t c = image.channels;
    const auto htaps = resample_taps(image.width, width);
    const auto vtaps = resample_taps(image.height, height);

    std::vector<double> mid(image.height * width * c);
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                const Taps& t = htaps[x];
                for (std::size_t k = 0; k < t.weights.size(); ++k) acc += t.weights[k] * image.at(t.first + k, y, ch);
                mid[(y * width + x) * c + ch] = acc;
            }

    Image out(width, height, c);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                const Taps& t = vtaps[y];
                for (std::size_t k = 0; k < t.weights.size(); ++k) acc += t.weights[k] * mid[((t.first + k) * width + x) * c + ch];
                out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
            }
    return out;
}

Image tile_grid(const std::vector<Image>& tiles, std::size_t cols, std::size_t pad) {
    if (tiles.empty() || cols == 0) throw ImageError("tile_grid: no tiles");
    const std::size_t w = tiles[0].width, h = tiles[0].height, c = tiles[0].channels;
    for (const auto& t : tiles)
        if (t.width != w || t.height != h || t.channels != c) throw ImageError("tile_grid: tiles differ in size");
    const std::size_t rows = (tiles.size() + cols - 1) / cols;
    Image out(cols * w + (cols + 1) * pad, rows * h + (rows + 1) * pad, c);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const std::size_t ox = pad + (i % cols) * (w + pad), oy = pad + (i / cols) * (h + pad);
        for (std::size_t y = 0; y < h; ++y)
            std::memcpy(&out.at(ox, oy + y, 0), &tiles[i].pixels[y * w * c], w * c);
    }
    return out;
}

}  // namespace albumgan
