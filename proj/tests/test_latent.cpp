#include <doctest.h>

#include <cmath>

#include "albumgan/latent.hpp"
#include "albumgan/ops.hpp"

using namespace albumgan;

namespace {

StyleVector random_vector(std::size_t rows, std::size_t cols, Rng& rng) {
    StyleVector w(rows, cols);
    for (auto& v : w.w) v = rng.normal();
    return w;
}

StyleConfig toy(std::size_t resolution) {
    StyleConfig c;
    c.resolution = resolution;
    c.latent_dim = 16;
    c.fmaps = 8;
    return c;
}

double mean_abs_delta(const Image& a, const Image& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) acc += std::abs(int(a.pixels[i]) - int(b.pixels[i]));
    return acc / static_cast<double>(a.pixels.size());
}

}  // namespace

TEST_SUITE("latent") {
    TEST_CASE("interpolation identities") {
        Rng rng(1);
        const StyleVector a = random_vector(6, 16, rng), b = random_vector(6, 16, rng);
        CHECK(interpolate(a, b, 0.0f) == a);
        CHECK(interpolate(a, b, 1.0f) == b);
        CHECK(interpolate(a, b, 0.5f) == average({a, b}));
        for (float lam : {0.0f, 0.1f, 0.3f, 0.77f, 1.0f}) CHECK(interpolate(a, a, lam) == a);
        CHECK_THROWS(interpolate(a, b, 1.5f));
        CHECK_THROWS(interpolate(a, b, -0.1f));
        CHECK_THROWS(interpolate(a, random_vector(5, 16, rng), 0.5f));
    }

    TEST_CASE("average") {
        Rng rng(2);
        const StyleVector w = random_vector(4, 8, rng);
        CHECK(average({w}) == w);
        CHECK(average({w, w, w}) == w);
        StyleVector neg = w;
        for (auto& v : neg.w) v = -v;
        for (float v : average({w, neg}).w) CHECK(v == 0.0f);
        CHECK_THROWS(average({}));

        // 49 vectors against a two-pass double oracle.
        std::vector<StyleVector> set;
        for (int i = 0; i < 49; ++i) set.push_back(random_vector(14, 32, rng));
        const StyleVector avg = average(set);
        for (std::size_t e = 0; e < avg.w.size(); ++e) {
            double mean = 0;
            for (const auto& v : set) mean += v.w[e];
            mean /= 49.0;
            double corr = 0;
            for (const auto& v : set) corr += v.w[e] - mean;
            CHECK(std::abs(avg.w[e] - (mean + corr / 49.0)) < 1e-6);
        }
        // Permutation invariance.
        std::vector<StyleVector> reversed(set.rbegin(), set.rend());
        CHECK(average(reversed) == avg);
    }

    TEST_CASE("style mixing row provenance") {
        Rng rng(3);
        const StyleVector a = random_vector(14, 512, rng), b = random_vector(14, 512, rng);
        CHECK(style_mix(a, b, 0) == a);
        CHECK(style_mix(a, b, 14) == b);
        CHECK(style_mix(a, a, 7) == a);
        const StyleVector m = style_mix(a, b, 7);
        for (std::size_t r = 0; r < 14; ++r) {
            const StyleVector& src = r < 7 ? b : a;
            for (std::size_t c = 0; c < 512; ++c) CHECK(m.at(r, c) == src.at(r, c));
        }
        // mix(a, b, k) and mix(b, a, n - k) take complementary rows.
        const StyleVector m2 = style_mix(b, a, 7);
        for (std::size_t r = 0; r < 14; ++r) {
            const bool from_b = std::equal(m.row(r).begin(), m.row(r).end(), b.row(r).begin());
            const bool from_b2 = std::equal(m2.row(r).begin(), m2.row(r).end(), b.row(r).begin());
            CHECK(from_b != from_b2);
        }
        CHECK_THROWS(style_mix(a, b, 15));
    }

    TEST_CASE("mixing grid") {
        Rng rng(4);
        StyleGenerator g(toy(32), rng);
        REQUIRE(g.config().num_styles() == 8);
        const StyleVector w0 = map_latent(g, rng.normal_vector(16)), w1 = map_latent(g, rng.normal_vector(16));
        const MixingGrid grid = mixing_grid({w0, w1}, 7, g);
        REQUIRE(grid.tiles.size() == 2);
        REQUIRE(grid.tiles[0].size() == 2);
        CHECK(grid.tiles[0][0].pixels == render(g, w0).pixels);
        CHECK(grid.tiles[1][1].pixels == render(g, w1).pixels);
        CHECK(grid.tiles[0][1].pixels != grid.tiles[0][0].pixels);
        CHECK(grid.tiles[1][0].pixels != grid.tiles[1][1].pixels);
        CHECK(grid.image.width == 2 * 32 + 3 * 2);
        CHECK(grid.labels == std::vector<std::string>{"source0", "source1"});
    }

    TEST_CASE("interpolation sequence") {
        Rng rng(5);
        StyleGenerator g(toy(16), rng);
        const StyleVector a = map_latent(g, rng.normal_vector(16)), b = map_latent(g, rng.normal_vector(16));
        const auto frames = interpolation_sequence(g, a, b, 50);
        REQUIRE(frames.size() == 50);
        CHECK(frames.front().pixels == render(g, a).pixels);
        const Image end = render(g, b);
        const double endpoints = mean_abs_delta(frames.front(), end);
        double worst = 0;
        for (std::size_t i = 1; i < frames.size(); ++i) worst = std::max(worst, mean_abs_delta(frames[i - 1], frames[i]));
        CHECK(worst < endpoints);
        CHECK_THROWS(interpolation_sequence(g, a, b, 0));
    }

    TEST_CASE("projection learning-rate schedule") {
        CHECK(projection_lr_scale(0.0f, 0.25f, 0.05f) == 0.0f);
        CHECK(projection_lr_scale(0.5f, 0.25f, 0.05f) == doctest::Approx(1.0));
        CHECK(projection_lr_scale(0.875f, 0.25f, 0.05f) == doctest::Approx(0.5));
        CHECK(projection_lr_scale(0.025f, 0.25f, 0.05f) == doctest::Approx(0.5));
    }

    TEST_CASE("projection at a fixed point stays put") {
        Rng rng(6);
        StyleGenerator g(toy(16), rng);
        const StyleVector w0 = map_latent(g, rng.normal_vector(16));
        Tensor target;
        {
            NoGradGuard no_grad;
            target = g.synthesize(Tensor::from({1, w0.num_styles, w0.latent_dim}, w0.w));
        }
        ProjectOptions options;
        options.steps = 10;
        options.init = w0;
        const ProjectionRun run = project(target, g, options);
        CHECK(run.loss_trace.size() == 10);
        CHECK(run.loss_trace[0] < 1e-12f);
        CHECK(run.w == w0);
    }

    TEST_CASE("projection reduces the loss") {
        Rng rng(7);
        StyleGenerator g(toy(16), rng);
        const StyleVector goal = map_latent(g, rng.normal_vector(16));
        Tensor target;
        {
            NoGradGuard no_grad;
            target = g.synthesize(Tensor::from({1, goal.num_styles, goal.latent_dim}, goal.w));
        }
        ProjectOptions options;
        options.steps = 100;
        options.mean_samples = 200;
        const ProjectionRun run = project(target, g, options);
        REQUIRE(run.loss_trace.size() == 100);
        CHECK(run.loss_trace.back() <= run.loss_trace.front());
        CHECK(run.w.num_styles == goal.num_styles);
        CHECK(ProjectOptions{}.steps == 600);
        CHECK_THROWS_AS(project(Tensor::zeros({1, 3, 8, 8}), g, options), ShapeError);
    }

    TEST_CASE("projection target conversion") {
        Image im(20, 20, 1);
        std::fill(im.pixels.begin(), im.pixels.end(), 255);
        const Tensor t = projection_target(im, toy(16));
        CHECK(t.shape() == Shape{1, 3, 16, 16});
        for (float v : t.data()) CHECK(v == doctest::Approx(1.0));
    }
}
