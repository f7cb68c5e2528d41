#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "albumgan/image.hpp"
#include "albumgan/nn.hpp"

namespace albumgan {

/// Fixed random-weight conv net mapping images to 64 features.
class FeatureExtractor {
   public:
    static constexpr std::size_t kDim = 64;
    static constexpr std::size_t kInputSize = 32;
    static constexpr std::uint64_t kSeed = 20220613;

    /// Weights drawn from kSeed, or loaded from a checkpoint written by save().
    FeatureExtractor();
    explicit FeatureExtractor(const std::filesystem::path& checkpoint);

    const std::string& id() const { return id_; }
    std::size_t dim() const { return kDim; }

    /// Each image is converted to RGB, resized to 32x32 and scaled to [-1, 1].
    /// Returns an n x 64 matrix, one row per image.
    Eigen::MatrixXd extract(const std::vector<Image>& images) const;
    void save(const std::filesystem::path& checkpoint) const;

   private:
    mutable nn::Sequential net_;
    std::string id_;
};

struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::size_t count = 0;

    /// Sample mean and unbiased covariance (n - 1); a single row gives zero covariance.
    static FeatureStats from_features(const Eigen::MatrixXd& features);
};

class MetricError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Eigenvalues below -kPsdTolerance * max(1, largest |eigenvalue|) reject a matrix.
inline constexpr double kPsdTolerance = 1e-8;

/// Square root of a symmetric PSD matrix via eigendecomposition, negative
/// eigenvalues clamped to 0.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the trace term
/// taken as the sum of singular values of S_a^(1/2) S_b^(1/2).
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

inline constexpr std::size_t kFidMinImages = 100;

struct FidReport {
    double fid = 0.0;
    std::size_t n_real = 0;
    std::size_t n_fake = 0;
    std::string extractor_id;
    std::vector<std::string> warnings;
    std::string to_json() const;
};

FidReport fid_report(const std::vector<Image>& real, const std::vector<Image>& fake,
                     const FeatureExtractor& extractor = FeatureExtractor());
FidReport fid_report(const std::filesystem::path& real_dir, const std::filesystem::path& fake_dir,
                     const FeatureExtractor& extractor = FeatureExtractor());

}  // namespace albumgan
