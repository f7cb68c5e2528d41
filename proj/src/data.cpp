#include "albumgan/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "albumgan/log.hpp"

namespace albumgan {

namespace fs = std::filesystem;

ChannelStats ChannelStats::uniform(std::size_t channels, float mean, float std) {
    ChannelStats s;
    s.mean.assign(channels, mean);
    s.std.assign(channels, std);
    return s;
}

ChannelStats channel_stats(const std::vector<Image>& images, std::size_t batch_size) {
    if (images.empty()) throw std::invalid_argument("channel_stats: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("channel_stats: batch size must be positive");
    const std::size_t c = images[0].channels;
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < images.size(); start += batch_size) {
        const std::size_t end = std::min(images.size(), start + batch_size);
        std::vector<double> bs(c, 0.0), bq(c, 0.0);
        std::size_t pixels = 0;
        for (std::size_t i = start; i < end; ++i) {
            const Image& im = images[i];
            if (im.channels != c) throw std::invalid_argument("channel_stats: mixed channel counts");
            if (i > start && (im.width != images[start].width || im.height != images[start].height)) {
                throw std::invalid_argument("channel_stats: images in a batch differ in size");
            }
            for (std::size_t p = 0; p < im.width * im.height; ++p) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double x = im.pixels[p * c + ch] / 255.0;
                    bs[ch] += x;
                    bq[ch] += x * x;
                }
            }
            pixels += im.width * im.height;
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
            sum[ch] += bs[ch] / static_cast<double>(pixels);
            sq[ch] += bq[ch] / static_cast<double>(pixels);
        }
        ++batches;
    }
    ChannelStats out;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double m = sum[ch] / static_cast<double>(batches);
        const double var = std::max(0.0, sq[ch] / static_cast<double>(batches) - m * m);
        out.mean.push_back(static_cast<float>(m));
        out.std.push_back(static_cast<float>(std::sqrt(var)));
        if (out.std.back() < kDegenerateStd) out.degenerate = true;
    }
    return out;
}

namespace {

// Degenerate channels divide by kDegenerateStd so constant inputs map to 0.
float safe_std(float s) { return std::max(s, kDegenerateStd); }

}  // namespace

std::vector<float> normalize(const Image& image, const ChannelStats& stats) {
    const std::size_t c = image.channels, hw = image.width * image.height;
    if (stats.channels() != c) throw std::invalid_argument("normalize: stats channel count mismatch");
    std::vector<float> out(c * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float m = stats.mean[ch], s = safe_std(stats.std[ch]);
        for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] = (image.pixels[p * c + ch] / 255.0f - m) / s;
    }
    return out;
}

Image denormalize(std::span<const float> chw, std::size_t width, std::size_t height, const ChannelStats& stats) {
    const std::size_t c = stats.channels(), hw = width * height;
    if (chw.size() != c * hw) throw std::invalid_argument("denormalize: size mismatch");
    Image out(width, height, c);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) {
            const double v = (static_cast<double>(chw[ch * hw + p]) * safe_std(stats.std[ch]) + stats.mean[ch]) * 255.0;
            out.pixels[p * c + ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    return out;
}

NormalizeMode parse_normalize_mode(const std::string& name) {
    if (name == "hardcoded_half") return NormalizeMode::hardcoded_half;
    if (name == "computed_stats") return NormalizeMode::computed_stats;
    if (name == "unit") return NormalizeMode::unit;
    throw std::invalid_argument("unknown normalize mode '" + name + "'");
}

std::string to_string(NormalizeMode mode) {
    switch (mode) {
        case NormalizeMode::hardcoded_half:
            return "hardcoded_half";
        case NormalizeMode::computed_stats:
            return "computed_stats";
        case NormalizeMode::unit:
            return "unit";
    }
    return "?";
}

ChannelStats stats_for(NormalizeMode mode, std::size_t channels, const std::optional<ChannelStats>& computed) {
    switch (mode) {
        case NormalizeMode::hardcoded_half:
            return ChannelStats::uniform(channels, 0.5f, 0.5f);
        case NormalizeMode::unit:
            return ChannelStats::uniform(channels, 0.0f, 1.0f);
        case NormalizeMode::computed_stats:
            if (!computed) throw std::invalid_argument("computed_stats normalization needs dataset statistics");
            if (computed->channels() != channels) throw std::invalid_argument("dataset statistics channel mismatch");
            return *computed;
    }
    throw std::invalid_argument("unknown normalize mode");
}

Image render_sample(std::span<const float> chw, std::size_t channels, std::size_t height, std::size_t width,
                    OutputRange range) {
    const std::size_t hw = height * width;
    if (chw.size() != channels * hw) throw std::invalid_argument("render_sample: size mismatch");
    Image out(width, height, channels);
    for (std::size_t ch = 0; ch < channels; ++ch)
        for (std::size_t p = 0; p < hw; ++p) {
            const float x = chw[ch * hw + p];
            const float v = range == OutputRange::symmetric ? x * 127.5f + 128.0f : x * 255.0f + 0.5f;
            out.pixels[p * channels + ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
        }
    return out;
}

std::vector<Image> render_batch(const Tensor& batch, OutputRange range) {
    if (batch.ndim() != 4) throw ShapeError("render_batch: expected [N, C, H, W]");
    const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    std::vector<Image> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(render_sample(batch.data().subspan(i * c * h * w, c * h * w), c, h, w, range));
    return out;
}

Image convert_channels(const Image& image, std::size_t channels) {
    if (image.channels == channels) return image;
    if (channels == 3) return to_rgb(image);
    if (channels != 1 || image.channels != 3) throw ImageError("convert_channels: unsupported conversion");
    Image out(image.width, image.height, 1);
    for (std::size_t p = 0; p < image.width * image.height; ++p) {
        const double y = 0.299 * image.pixels[p * 3] + 0.587 * image.pixels[p * 3 + 1] + 0.114 * image.pixels[p * 3 + 2];
        out.pixels[p] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
    }
    return out;
}

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != kDatasetMetadataFile) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

ImageSet load_image_dir(const fs::path& dir, std::size_t channels) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    ImageSet set;
    for (const auto& path : sorted_files(dir)) {
        if (!is_image_file(path)) continue;
        try {
            set.images.push_back(convert_channels(read_image(path), channels));
            set.ids.push_back(path.stem().string());
        } catch (const std::exception& e) {
            logging::warn("skipping {}: {}", path.string(), e.what());
        }
    }
    return set;
}

Tensor to_batch(const std::vector<Image>& images, std::span<const std::size_t> indices, const ChannelStats& stats) {
    if (indices.empty()) throw std::invalid_argument("to_batch: empty batch");
    const Image& first = images.at(indices[0]);
    const std::size_t c = first.channels, h = first.height, w = first.width;
    std::vector<float> data;
    data.reserve(indices.size() * c * h * w);
    for (auto i : indices) {
        const Image& im = images.at(i);
        if (im.channels != c || im.height != h || im.width != w) throw ShapeError("to_batch: images differ in shape");
        const auto v = normalize(im, stats);
        data.insert(data.end(), v.begin(), v.end());
    }
    return Tensor::from({indices.size(), c, h, w}, std::move(data));
}

void write_metadata(const fs::path& path, const DatasetMetadata& meta) {
    nlohmann::ordered_json j;
    j["width"] = meta.width;
    j["height"] = meta.height;
    j["count"] = meta.count;
    if (meta.stats) {
        j["stats"] = {{"mean", meta.stats->mean}, {"std", meta.stats->std}, {"degenerate", meta.stats->degenerate}};
    } else {
        j["stats"] = nullptr;
    }
    j["filter"] = meta.filter;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

DatasetMetadata read_metadata(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto j = nlohmann::json::parse(in);
    DatasetMetadata meta;
    meta.width = j.at("width").get<std::size_t>();
    meta.height = j.at("height").get<std::size_t>();
    meta.count = j.at("count").get<std::size_t>();
    if (!j.at("stats").is_null()) {
        ChannelStats s;
        s.mean = j["stats"].at("mean").get<std::vector<float>>();
        s.std = j["stats"].at("std").get<std::vector<float>>();
        s.degenerate = j["stats"].value("degenerate", false);
        meta.stats = s;
    }
    meta.filter = j.value("filter", std::string(kResizeFilter));
    return meta;
}

PrepareResult prepare_dataset(const fs::path& src_dir, const fs::path& dest_dir, std::size_t width,
                              std::size_t height) {
    if (!fs::is_directory(src_dir)) throw std::runtime_error("source directory does not exist: " + src_dir.string());
    if (width == 0 || height == 0) throw std::invalid_argument("target size must be positive");
    std::error_code ec;
    fs::create_directories(dest_dir, ec);
    if (ec || !fs::is_directory(dest_dir)) throw std::runtime_error("cannot create " + dest_dir.string());

    PrepareResult result;
    std::vector<Image> written;
    for (const auto& path : sorted_files(src_dir)) {
        Image im;
        try {
            im = read_image(path);
        } catch (const std::exception& e) {
            logging::warn("skipping unreadable {}: {}", path.string(), e.what());
            result.skipped.push_back(path.filename().string());
            continue;
        }
        im = resize_lanczos(to_rgb(im), width, height);
        write_png(dest_dir / (path.stem().string() + ".png"), im);
        written.push_back(std::move(im));
    }
    result.written = written.size();

    DatasetMetadata meta;
    meta.width = width;
    meta.height = height;
    meta.count = written.size();
    if (!written.empty()) meta.stats = channel_stats(written);
    write_metadata(dest_dir / kDatasetMetadataFile, meta);
    return result;
}

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

Image cover_image(std::size_t w, std::size_t h, Rng& rng) {
    float c1[3], c2[3], c3[3];
    for (int i = 0; i < 3; ++i) {
        c1[i] = rng.uniform(0.0f, 255.0f);
        c2[i] = rng.uniform(0.0f, 255.0f);
        c3[i] = rng.uniform(0.0f, 255.0f);
    }
    const double angle = rng.uniform(0.0f, 2.0f * std::numbers::pi_v<float>);
    const double cx = rng.uniform(0.2f, 0.8f) * w, cy = rng.uniform(0.2f, 0.8f) * h;
    const double radius = rng.uniform(0.1f, 0.35f) * std::min(w, h);
    const double band = rng.uniform(0.0f, 1.0f) * h, band_h = rng.uniform(0.05f, 0.2f) * h;
    Image im(w, h, 3);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double u = ((x + 0.5) / w - 0.5) * std::cos(angle) + ((y + 0.5) / h - 0.5) * std::sin(angle) + 0.5;
            const double t = std::clamp(u, 0.0, 1.0);
            const bool in_circle = std::hypot(x + 0.5 - cx, y + 0.5 - cy) < radius;
            const bool in_band = std::abs(y + 0.5 - band) < band_h * 0.5;
            for (int c = 0; c < 3; ++c) {
                double v = (1 - t) * c1[c] + t * c2[c];
                if (in_circle) v = c3[c];
                if (in_band) v = 255.0 - v;
                im.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    return im;
}

Image stroke_image(std::size_t w, std::size_t h, Rng& rng) {
    const int strokes = static_cast<int>(rng.integer(1, 3));
    std::vector<std::array<double, 4>> segs;
    for (int s = 0; s < strokes; ++s) {
        segs.push_back({rng.uniform(0.2f, 0.8f) * w, rng.uniform(0.15f, 0.85f) * h, rng.uniform(0.2f, 0.8f) * w,
                        rng.uniform(0.15f, 0.85f) * h});
    }
    const double thickness = rng.uniform(0.05f, 0.09f) * std::min(w, h);
    Image im(w, h, 1);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double d = 1e9;
            for (const auto& s : segs) d = std::min(d, segment_distance(x + 0.5, y + 0.5, s[0], s[1], s[2], s[3]));
            const double v = std::clamp(1.0 - (d - thickness), 0.0, 1.0) * 255.0;
            im.at(x, y, 0) = static_cast<std::uint8_t>(v);
        }
    return im;
}

}  // namespace

std::vector<Image> fixture_images(std::size_t count, std::size_t width, std::size_t height, std::size_t channels,
                                  FixtureStyle style, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Image im = style == FixtureStyle::covers ? cover_image(width, height, rng) : stroke_image(width, height, rng);
        out.push_back(convert_channels(im, channels));
    }
    return out;
}

}  // namespace albumgan
