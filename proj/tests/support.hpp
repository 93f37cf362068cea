#pragma once

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "driftguard/codebook.hpp"
#include "driftguard/latent.hpp"

namespace testing {

// Brute-force nearest centroid, written independently of the library: long
// double accumulation for the argmin, then the index is re-scored with the
// canonical double sum so distances can be compared bit for bit.
inline std::pair<std::size_t, double> brute_nearest(driftguard::ConstVec x, const std::vector<float>& cents,
                                                    std::size_t dim) {
    const std::size_t k = cents.size() / dim;
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = double(x[d]) - double(cents[j * dim + d]);
            acc += diff * diff;
        }
        if (acc < best_sq) {
            best_sq = acc;
            best = j;
        }
    }
    return {best, std::sqrt(best_sq)};
}

inline std::vector<float> random_values(std::size_t count, std::uint64_t seed, float lo = -1.0f,
                                        float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(count);
    for (float& x : v) x = u(rng);
    return v;
}

inline driftguard::Codebook random_codebook(std::size_t k, std::size_t dim, std::uint64_t seed,
                                            std::array<double, 4> quantiles = {0.1, 0.2, 0.3, 0.4}) {
    return driftguard::Codebook(dim, random_values(k * dim, seed), std::vector<std::uint64_t>(k, 1),
                                quantiles, driftguard::BuildMeta{seed, 0, 0.0});
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("driftguard_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
