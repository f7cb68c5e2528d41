#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "albumgan/data.hpp"
#include "albumgan/fixture_server.hpp"
#include "albumgan/image.hpp"
#include "albumgan/playlist.hpp"
#include "support/tempdir.hpp"

using namespace albumgan;
namespace fs = std::filesystem;

namespace {

Image solid(std::size_t w, std::size_t h, std::size_t c, std::uint8_t v) {
    Image im(w, h, c);
    std::fill(im.pixels.begin(), im.pixels.end(), v);
    return im;
}

Image random_image(std::size_t w, std::size_t h, std::size_t c, Rng& rng) {
    Image im(w, h, c);
    for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.integer(0, 255));
    return im;
}

// Two-pass per-channel mean and population std over every pixel.
std::pair<std::vector<double>, std::vector<double>> exact_stats(const std::vector<Image>& images) {
    const std::size_t c = images[0].channels;
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    double n = 0;
    for (const auto& im : images)
        for (std::size_t p = 0; p < im.width * im.height; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += im.pixels[p * c + ch] / 255.0;
            n += 1;
        }
    for (auto& m : mean) m /= n;
    for (const auto& im : images)
        for (std::size_t p = 0; p < im.width * im.height; ++p)
            for (std::size_t ch = 0; ch < c; ++ch) var[ch] += std::pow(im.pixels[p * c + ch] / 255.0 - mean[ch], 2);
    for (auto& v : var) v = std::sqrt(v / n);
    return {mean, var};
}

}  // namespace

TEST_SUITE("data") {
    TEST_CASE("png round trip preserves pixels") {
        Rng rng(1);
        for (std::size_t c : {1, 3}) {
            const Image im = random_image(7, 5, c, rng);
            const Image back = decode_image(encode_png(im));
            CHECK(back.width == 7);
            CHECK(back.height == 5);
            CHECK(back.channels == c);
            CHECK(back.pixels == im.pixels);
        }
    }

    TEST_CASE("jpeg decodes to the encoded size and mode") {
        const Image gray = solid(16, 8, 1, 120);
        const Image back = decode_image(encode_jpeg(gray));
        CHECK(back.channels == 1);
        CHECK(back.width == 16);
        for (auto p : back.pixels) CHECK(std::abs(p - 120) <= 2);
        CHECK_THROWS_AS(decode_image({1, 2, 3, 4}), ImageError);
    }

    TEST_CASE("lanczos resize keeps constants and hits the target size") {
        const Image im = solid(512, 512, 3, 77);
        const Image small = resize_lanczos(im, 256, 256);
        CHECK(small.width == 256);
        CHECK(small.height == 256);
        CHECK(std::all_of(small.pixels.begin(), small.pixels.end(), [](auto p) { return p == 77; }));
        const Image up = resize_lanczos(solid(3, 5, 1, 200), 9, 4);
        CHECK(std::all_of(up.pixels.begin(), up.pixels.end(), [](auto p) { return p == 200; }));
    }

    TEST_CASE("gray to rgb replicates") {
        Rng rng(2);
        const Image g = random_image(4, 4, 1, rng);
        const Image rgb = to_rgb(g);
        REQUIRE(rgb.channels == 3);
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(rgb.pixels[i * 3] == g.pixels[i]);
            CHECK(rgb.pixels[i * 3 + 1] == g.pixels[i]);
            CHECK(rgb.pixels[i * 3 + 2] == g.pixels[i]);
        }
    }

    TEST_CASE("channel stats of a constant dataset is degenerate") {
        const std::vector<Image> images(5, solid(4, 4, 3, 255));
        const ChannelStats s = channel_stats(images);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(s.mean[c] == doctest::Approx(1.0));
            CHECK(s.std[c] == 0.0f);
        }
        CHECK(s.degenerate);
        CHECK_THROWS(channel_stats({}));
    }

    TEST_CASE("channel stats match the exact two-pass formula") {
        Image a(2, 2, 3), b(2, 2, 3);
        const std::uint8_t av[] = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110};
        const std::uint8_t bv[] = {255, 200, 150, 100, 50, 0, 5, 15, 25, 35, 45, 55};
        std::copy(std::begin(av), std::end(av), a.pixels.begin());
        std::copy(std::begin(bv), std::end(bv), b.pixels.begin());
        const auto [mean, std] = exact_stats({a, b});
        for (std::size_t bs : {1, 2}) {
            const ChannelStats s = channel_stats({a, b}, bs);
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(s.mean[c] == doctest::Approx(mean[c]).epsilon(1e-6));
                CHECK(s.std[c] == doctest::Approx(std[c]).epsilon(1e-5));
            }
        }
    }

    TEST_CASE("channel stats are permutation invariant with equal batches") {
        auto images = fixture_images(32, 8, 8, 3, FixtureStyle::covers, 3);
        const ChannelStats s1 = channel_stats(images, 8);
        std::mt19937 g(4);
        std::shuffle(images.begin(), images.end(), g);
        const ChannelStats s2 = channel_stats(images, 8);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(s1.mean[c] == doctest::Approx(s2.mean[c]).epsilon(1e-6));
            CHECK(s1.std[c] == doctest::Approx(s2.std[c]).epsilon(1e-5));
        }
    }

    TEST_CASE("normalize examples") {
        const ChannelStats half = ChannelStats::uniform(3, 0.5f, 0.5f);
        CHECK(normalize(solid(1, 1, 3, 255), half) == std::vector<float>{1, 1, 1});
        CHECK(normalize(solid(1, 1, 3, 0), half) == std::vector<float>{-1, -1, -1});
        const ChannelStats s = ChannelStats::uniform(1, 0.2f, 0.3f);
        CHECK(normalize(solid(1, 1, 1, 51), s)[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    }

    TEST_CASE("denormalize inverts normalize") {
        Rng rng(5);
        const Image im = random_image(9, 7, 3, rng);
        ChannelStats s;
        s.mean = {0.3f, 0.5f, 0.7f};
        s.std = {0.2f, 0.25f, 0.4f};
        const auto v = normalize(im, s);
        CHECK(denormalize(v, 9, 7, s).pixels == im.pixels);
    }

    TEST_CASE("self-normalized dataset has zero mean and unit std") {
        const auto images = fixture_images(256, 16, 16, 3, FixtureStyle::covers, 6);
        const ChannelStats s = channel_stats(images);
        std::vector<double> sum(3, 0), sq(3, 0);
        double n = 0;
        for (const auto& im : images) {
            const auto v = normalize(im, s);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < 256; ++p) {
                    sum[c] += v[c * 256 + p];
                    sq[c] += v[c * 256 + p] * v[c * 256 + p];
                }
            n += 256;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            const double m = sum[c] / n;
            CHECK(std::abs(m) < 1e-3);
            CHECK(std::abs(std::sqrt(sq[c] / n - m * m) - 1.0) < 1e-2);
        }
    }

    TEST_CASE("render matches the uint8 conversion of the generation scripts") {
        const std::vector<float> v{-1.0f, 0.0f, 1.0f, 0.999f};
        const Image im = render_sample(v, 1, 2, 2, OutputRange::symmetric);
        CHECK(im.pixels == std::vector<std::uint8_t>{0, 128, 255, 255});
        const Image u = render_sample(std::vector<float>{0.0f, 0.5f, 1.0f, 2.0f}, 1, 2, 2, OutputRange::unit);
        CHECK(u.pixels == std::vector<std::uint8_t>{0, 128, 255, 255});
    }

    TEST_CASE("normalize modes") {
        CHECK(stats_for(NormalizeMode::hardcoded_half, 3, std::nullopt).mean[0] == 0.5f);
        CHECK(stats_for(NormalizeMode::unit, 1, std::nullopt).std[0] == 1.0f);
        CHECK_THROWS(stats_for(NormalizeMode::computed_stats, 3, std::nullopt));
        CHECK(parse_normalize_mode(to_string(NormalizeMode::computed_stats)) == NormalizeMode::computed_stats);
        CHECK_THROWS(parse_normalize_mode("zscore"));
    }

    TEST_CASE("prepare dataset resizes and converts") {
        test::TempDir tmp;
        const fs::path src = tmp.path() / "src", dest = tmp.path() / "dest";
        fs::create_directories(src);
        Rng rng(7);
        write_png(src / "big.png", random_image(512, 512, 3, rng));
        write_file(src / "gray.jpg", encode_jpeg(fixture_images(1, 40, 30, 1, FixtureStyle::strokes, 1)[0]));
        write_file(src / "broken.png", {1, 2, 3});

        const PrepareResult r = prepare_dataset(src, dest, 256, 256);
        CHECK(r.written == 2);
        CHECK(r.skipped == std::vector<std::string>{"broken.png"});
        const Image big = read_image(dest / "big.png");
        CHECK(big.width == 256);
        CHECK(big.channels == 3);
        const Image gray = read_image(dest / "gray.png");
        REQUIRE(gray.channels == 3);
        for (std::size_t p = 0; p < gray.width * gray.height; ++p) {
            CHECK(gray.pixels[p * 3] == gray.pixels[p * 3 + 1]);
            CHECK(gray.pixels[p * 3] == gray.pixels[p * 3 + 2]);
        }
        const DatasetMetadata meta = read_metadata(dest / kDatasetMetadataFile);
        CHECK(meta.count == 2);
        CHECK(meta.width == 256);
        CHECK(meta.filter == "lanczos3");
        REQUIRE(meta.stats.has_value());
        CHECK(meta.stats->mean.size() == 3);

        // Idempotent: a second run writes identical bytes.
        const auto first = read_file(dest / "gray.png");
        prepare_dataset(src, dest, 256, 256);
        CHECK(read_file(dest / "gray.png") == first);
    }

    TEST_CASE("prepare dataset edge cases") {
        test::TempDir tmp;
        fs::create_directories(tmp.path() / "empty");
        CHECK(prepare_dataset(tmp.path() / "empty", tmp.path() / "out", 64, 64).written == 0);
        CHECK_FALSE(read_metadata(tmp.path() / "out" / kDatasetMetadataFile).stats.has_value());
        CHECK_THROWS(prepare_dataset(tmp.path() / "missing", tmp.path() / "out", 64, 64));
    }

    TEST_CASE("url parsing and cover extensions") {
        const UrlParts u = parse_url("http://127.0.0.1:8080/a/b?x=1");
        CHECK(u.host == "127.0.0.1");
        CHECK(u.port == 8080);
        CHECK(u.path == "/a/b?x=1");
        CHECK(parse_url("http://example.org").path == "/");
        CHECK_THROWS(parse_url("https://example.org/"));
        CHECK_THROWS(parse_url("example.org/x"));
        CHECK(cover_extension("http://h/i/abc.PNG?size=2", "") == ".png");
        CHECK(cover_extension("http://h/i/abc", "image/png") == ".png");
        CHECK(cover_extension("http://h.x/i/abc", "") == ".jpg");
    }
}

TEST_SUITE("playlist") {
    TEST_CASE("fetch dedupes albums within a playlist") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const FetchResult r = fetch_covers({{"fixture-mix"}, server.base_url(), "token"}, client);
        CHECK(r.albums.size() == 2);
        CHECK(r.albums.at("albA") == server.base_url() + "/images/albA_300.jpg");
        CHECK(r.errors.empty());
    }

    TEST_CASE("fetch follows pagination and skips malformed tracks") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const FetchResult r = fetch_covers({{"fixture-long"}, server.base_url(), "token"}, client);
        CHECK(r.pages == 2);
        CHECK(r.skipped_tracks == 3);
        CHECK(r.albums.size() == server.catalog().expected_albums({"fixture-long"}));
        CHECK(r.albums.count("single") == 0);
    }

    TEST_CASE("a failing playlist does not stop the others") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const FetchResult r =
            fetch_covers({{"fixture-broken", "fixture-mix", "no-such-list"}, server.base_url(), "t"}, client);
        CHECK(r.albums.size() == 2);
        CHECK(r.errors.size() == 2);
        CHECK(r.errors.count("fixture-broken") == 1);
    }

    TEST_CASE("missing token is rejected by the fixture server") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const FetchResult r = fetch_covers({{"fixture-mix"}, server.base_url(), ""}, client);
        CHECK(r.albums.empty());
        CHECK(r.errors.count("fixture-mix") == 1);
    }

    TEST_CASE("fetch result does not depend on playlist order") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const std::vector<std::string> ids{"fixture-mix", "fixture-long", "fixture-overlap"};
        const auto forward = fetch_covers({ids, server.base_url(), "t"}, client);
        const auto backward = fetch_covers({{ids.rbegin(), ids.rend()}, server.base_url(), "t"}, client);
        CHECK(forward.albums == backward.albums);
        CHECK(forward.albums.size() == server.catalog().expected_albums(ids));
    }

    TEST_CASE("downloads are byte-identical and independent of parallelism") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const auto all = fetch_covers({{"fixture-long"}, server.base_url(), "t"}, client).albums;
        std::map<std::string, std::string> ten;
        for (const auto& [id, url] : all) {
            if (id == "dead") continue;
            ten.emplace(id, url);
            if (ten.size() == 10) break;
        }
        test::TempDir tmp;
        const DownloadResult four = download_all(ten, tmp.path() / "p4", 4, client);
        CHECK(four.downloaded == 10);
        CHECK(four.failures.empty());
        for (const auto& [id, url] : ten) {
            const auto path = tmp.path() / "p4" / (id + ".jpg");
            REQUIRE(fs::exists(path));
            CHECK(read_file(path) == server.catalog().files.at(parse_url(url).path));
        }
        const DownloadResult one = download_all(ten, tmp.path() / "p1", 1, client);
        const DownloadResult eight = download_all(ten, tmp.path() / "p8", 8, client);
        auto names = [](const DownloadResult& r) {
            std::vector<std::string> n;
            for (const auto& f : r.files) n.push_back(f.filename().string());
            return n;
        };
        CHECK(names(one) == names(eight));
        CHECK(names(one) == names(four));
    }

    TEST_CASE("a dead url is counted as a failure") {
        FixtureServer server(default_fixture_catalog());
        server.start();
        HttplibClient client;
        const auto all = fetch_covers({{"fixture-long"}, server.base_url(), "t"}, client).albums;
        REQUIRE(all.count("dead") == 1);
        test::TempDir tmp;
        const DownloadResult r = download_all(all, tmp.path(), 3, client);
        CHECK(r.downloaded == all.size() - 1);
        CHECK(r.failures.count("dead") == 1);
    }
}
