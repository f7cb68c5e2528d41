#include "albumgan/metrics.hpp"

#include <fmt/core.h>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "albumgan/checkpoint.hpp"
#include "albumgan/data.hpp"
#include "albumgan/ops.hpp"

namespace albumgan {

namespace {

std::vector<nn::LayerSpec> extractor_specs() {
    const auto leaky = Activation::leaky_relu(0.2f);
    return {
        nn::LayerSpec::conv(3, 16, 3, 2, 1, leaky, nn::InitScheme::he),
        nn::LayerSpec::conv(16, 32, 3, 2, 1, leaky, nn::InitScheme::he),
        nn::LayerSpec::conv(32, FeatureExtractor::kDim, 3, 2, 1, leaky, nn::InitScheme::he),
    };
}

}  // namespace

FeatureExtractor::FeatureExtractor() : id_(fmt::format("toy-conv64-seed{}", kSeed)) {
    Rng rng(kSeed);
    net_ = nn::Sequential(extractor_specs(), rng);
}

FeatureExtractor::FeatureExtractor(const std::filesystem::path& checkpoint)
    : id_("toy-conv64:" + checkpoint.filename().string()) {
    Rng rng(kSeed);
    net_ = nn::Sequential(extractor_specs(), rng);
    net_.load_state("extractor.", load_checkpoint(checkpoint));
}

void FeatureExtractor::save(const std::filesystem::path& checkpoint) const {
    save_checkpoint(checkpoint, net_.state("extractor."));
}

Eigen::MatrixXd FeatureExtractor::extract(const std::vector<Image>& images) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(kDim));
    if (images.empty()) return out;
    const ChannelStats half = ChannelStats::uniform(3, 0.5f, 0.5f);
    NoGradGuard no_grad;
    Rng unused(0);
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < images.size(); start += kChunk) {
        const std::size_t end = std::min(images.size(), start + kChunk);
        std::vector<Image> prepared;
        for (std::size_t i = start; i < end; ++i) {
            Image im = to_rgb(images[i]);
            if (im.width != kInputSize || im.height != kInputSize) im = resize_lanczos(im, kInputSize, kInputSize);
            prepared.push_back(std::move(im));
        }
        std::vector<std::size_t> idx(prepared.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const Tensor h = net_.forward(to_batch(prepared, idx, half), nn::Mode::eval, unused);
        const Tensor pooled = mean(h, {2, 3}, false);
        const auto v = pooled.data();
        for (std::size_t i = 0; i < prepared.size(); ++i)
            for (std::size_t k = 0; k < kDim; ++k) {
                out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(k)) = v[i * kDim + k];
            }
    }
    return out;
}

FeatureStats FeatureStats::from_features(const Eigen::MatrixXd& features) {
    if (features.rows() == 0) throw MetricError("feature stats: no samples");
    FeatureStats s;
    s.count = static_cast<std::size_t>(features.rows());
    s.mean = features.colwise().mean().transpose();
    if (features.rows() < 2) {
        s.cov = Eigen::MatrixXd::Zero(features.cols(), features.cols());
        return s;
    }
    const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
    s.cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
    return s;
}

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> checked_eigen(const Eigen::MatrixXd& m, const char* what) {
    if (m.rows() != m.cols()) throw MetricError(fmt::format("{}: matrix is not square", what));
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) throw MetricError(fmt::format("{}: eigendecomposition failed", what));
    const auto& ev = solver.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.size() > 0 && ev.minCoeff() < -kPsdTolerance * scale) {
        throw MetricError(fmt::format("{}: not positive semi-definite (eigenvalue {:.3g})", what, ev.minCoeff()));
    }
    return solver;
}

}  // namespace

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
    const auto solver = checked_eigen(m, "sqrtm");
    const Eigen::VectorXd root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
        throw MetricError(fmt::format("frechet_distance: dimension {} vs {}", a.mean.size(), b.mean.size()));
    }
    // Tr((S_a S_b)^(1/2)) is the nuclear norm of S_a^(1/2) S_b^(1/2); singular
    // values avoid square roots of near-zero eigenvalues.
    const Eigen::MatrixXd cross_root = sqrtm_psd(a.cov) * sqrtm_psd(b.cov);
    const double cross =
        Eigen::JacobiSVD<Eigen::MatrixXd>(cross_root).singularValues().sum();
    const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    return std::max(0.0, d);
}

std::string FidReport::to_json() const {
    nlohmann::json j{{"fid", fid},
                     {"n_real", n_real},
                     {"n_fake", n_fake},
                     {"extractor_id", extractor_id},
                     {"warnings", warnings}};
    return j.dump(2) + "\n";
}

FidReport fid_report(const std::vector<Image>& real, const std::vector<Image>& fake, const FeatureExtractor& extractor) {
    if (real.empty() || fake.empty()) throw MetricError("fid: both image sets must be non-empty");
    FidReport r;
    r.n_real = real.size();
    r.n_fake = fake.size();
    r.extractor_id = extractor.id();
    if (r.n_real < kFidMinImages || r.n_fake < kFidMinImages) {
        r.warnings.push_back(fmt::format("fewer than {} images (real {}, fake {}); the estimate is unreliable",
                                         kFidMinImages, r.n_real, r.n_fake));
    }
    r.fid = frechet_distance(FeatureStats::from_features(extractor.extract(real)),
                             FeatureStats::from_features(extractor.extract(fake)));
    return r;
}

FidReport fid_report(const std::filesystem::path& real_dir, const std::filesystem::path& fake_dir,
                     const FeatureExtractor& extractor) {
    return fid_report(load_image_dir(real_dir, 3).images, load_image_dir(fake_dir, 3).images, extractor);
}

}  // namespace albumgan
