#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "albumgan/data.hpp"
#include "albumgan/metrics.hpp"
#include "support/tempdir.hpp"

using namespace albumgan;

namespace {

FeatureStats gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    FeatureStats s;
    s.mean = std::move(mean);
    s.cov = std::move(cov);
    s.count = 1000;
    return s;
}

Eigen::MatrixXd random_psd(std::size_t d, std::mt19937& gen) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(gen);
    // Rank-deficient when d is odd.
    if (d % 2 == 1) a.col(0).setZero();
    return a * a.transpose() / static_cast<double>(d);
}

std::vector<Image> noisy_copies(const std::vector<Image>& src, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> out = src;
    for (auto& im : out)
        for (auto& p : im.pixels) {
            const double v = p + sigma * rng.normal();
            p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    return out;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("frechet distance closed forms") {
        const auto a = gaussian(Eigen::VectorXd::Constant(1, 0.5), Eigen::MatrixXd::Constant(1, 1, 4.0));
        const auto b = gaussian(Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd::Constant(1, 1, 0.25));
        // (0.5 + 1)^2 + (2 - 0.5)^2
        CHECK(std::abs(frechet_distance(a, b) - 4.5) < 1e-6);
        CHECK(std::abs(frechet_distance(a, a)) < 1e-6);

        Eigen::VectorXd m1(3), m2(3), s1(3), s2(3);
        m1 << 0.0, 1.0, 2.0;
        m2 << 0.5, -1.0, 2.0;
        s1 << 1.0, 0.04, 9.0;
        s2 << 4.0, 0.09, 9.0;
        double expected = 0;
        for (int i = 0; i < 3; ++i) expected += std::pow(m1[i] - m2[i], 2) + std::pow(std::sqrt(s1[i]) - std::sqrt(s2[i]), 2);
        const double d = frechet_distance(gaussian(m1, s1.asDiagonal()), gaussian(m2, s2.asDiagonal()));
        CHECK(std::abs(d - expected) < 1e-6);
    }

    TEST_CASE("frechet distance is symmetric and rotation invariant") {
        std::mt19937 gen(3);
        for (std::size_t d : {2, 5, 16, 63, 64}) {
            const auto a = gaussian(Eigen::VectorXd::Random(d), random_psd(d, gen));
            const auto b = gaussian(Eigen::VectorXd::Random(d), random_psd(d, gen));
            const double ab = frechet_distance(a, b);
            CHECK(std::abs(ab - frechet_distance(b, a)) < 1e-8);
            const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_psd(d, gen) +
                                                                            Eigen::MatrixXd::Identity(d, d))
                                          .householderQ();
            const auto ra = gaussian(q * a.mean, q * a.cov * q.transpose());
            const auto rb = gaussian(q * b.mean, q * b.cov * q.transpose());
            CHECK(std::abs(frechet_distance(ra, rb) - ab) < 1e-5);
        }
    }

    TEST_CASE("matrix square root reconstructs psd matrices") {
        std::mt19937 gen(5);
        for (std::size_t d : {1, 3, 8, 33, 64}) {
            const Eigen::MatrixXd m = random_psd(d, gen);
            const Eigen::MatrixXd r = sqrtm_psd(m);
            CHECK((r * r - m).norm() / std::max(m.norm(), 1e-12) < 1e-5);
        }
        Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
        bad(1, 1) = -0.5;
        CHECK_THROWS_AS(sqrtm_psd(bad), MetricError);
        const auto a = gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
        CHECK_THROWS_AS(frechet_distance(a, gaussian(Eigen::VectorXd::Zero(2), bad)), MetricError);
        CHECK_THROWS_AS(frechet_distance(a, gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3))),
                        MetricError);
    }

    TEST_CASE("feature stats") {
        Eigen::MatrixXd f(4, 2);
        f << 1, 0, 2, 0, 3, 1, 4, 1;
        const auto s = FeatureStats::from_features(f);
        CHECK(s.mean(0) == doctest::Approx(2.5));
        CHECK(s.cov(0, 0) == doctest::Approx(5.0 / 3.0));
        CHECK(s.cov(0, 1) == doctest::Approx(s.cov(1, 0)));
        CHECK_THROWS_AS(FeatureStats::from_features(Eigen::MatrixXd(0, 2)), MetricError);
    }

    TEST_CASE("extractor") {
        const FeatureExtractor ex;
        CHECK(ex.dim() == 64);
        auto images = fixture_images(6, 40, 40, 3, FixtureStyle::covers, 1);
        images.push_back(images[0]);
        const Eigen::MatrixXd f = ex.extract(images);
        CHECK(f.rows() == 7);
        CHECK(f.cols() == 64);
        CHECK(f.row(0) == f.row(6));
        std::vector<Image> swapped{images[2], images[1], images[0]};
        const Eigen::MatrixXd g = ex.extract(swapped);
        CHECK(g.row(0) == f.row(2));
        CHECK(g.row(2) == f.row(0));
        CHECK(FeatureExtractor().extract(images) == f);

        test::TempDir dir;
        ex.save(dir.path() / "extractor.ckpt");
        CHECK(FeatureExtractor(dir.path() / "extractor.ckpt").extract(images) == f);
    }

    TEST_CASE("fid report") {
        const auto real = fixture_images(120, 32, 32, 3, FixtureStyle::covers, 2);
        const FidReport same = fid_report(real, real);
        CHECK(std::abs(same.fid) < 1e-6);
        CHECK(same.warnings.empty());
        CHECK(same.n_real == 120);
        const auto j = nlohmann::json::parse(same.to_json());
        for (const char* key : {"fid", "n_real", "n_fake", "extractor_id", "warnings"}) CHECK(j.contains(key));

        double last = 0;
        for (double sigma : {8.0, 24.0, 64.0}) {
            const double d = fid_report(real, noisy_copies(real, sigma, 9)).fid;
            CHECK(d > last);
            last = d;
        }
        const std::vector<Image> few(real.begin(), real.begin() + 50);
        CHECK(fid_report(few, real).warnings.size() == 1);
        CHECK_THROWS_AS(fid_report(std::vector<Image>{}, real), MetricError);
    }

    TEST_CASE("fid report from directories") {
        test::TempDir a;
        const auto real = fixture_images(10, 32, 32, 3, FixtureStyle::covers, 4);
        for (std::size_t i = 0; i < real.size(); ++i) write_png(a.path() / ("r" + std::to_string(i) + ".png"), real[i]);
        const FidReport r = fid_report(a.path(), a.path());
        CHECK(std::abs(r.fid) < 1e-6);
        CHECK(r.n_fake == 10);
        CHECK_FALSE(r.warnings.empty());
    }
}
