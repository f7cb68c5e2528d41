#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace albumgan {

/// Seeded random source shared by a run. All stochastic code draws from one of
/// these so identical seeds give identical results.
class Rng {
   public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    float normal(float mean = 0.0f, float stddev = 1.0f) {
        return std::normal_distribution<float>(mean, stddev)(engine_);
    }
    float uniform(float lo = 0.0f, float hi = 1.0f) {
        return std::uniform_real_distribution<float>(lo, hi)(engine_);
    }
    bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
    // Inclusive range.
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }
    std::uint64_t next() { return engine_(); }

    std::vector<float> normal_vector(std::size_t n, float mean = 0.0f, float stddev = 1.0f) {
        std::vector<float> v(n);
        for (auto& x : v) x = normal(mean, stddev);
        return v;
    }

    std::vector<std::size_t> permutation(std::size_t n);

    std::mt19937_64& engine() { return engine_; }

   private:
    std::mt19937_64 engine_;
};

inline std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    // Fisher-Yates with our own integer draws keeps the order independent of
    // the standard library's shuffle implementation.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(i - 1)));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace albumgan
