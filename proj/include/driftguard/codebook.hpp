#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "driftguard/detail/centroid_search.hpp"
#include "driftguard/latent.hpp"

namespace driftguard {

inline constexpr std::size_t kFullScaleCodebookSize = 40000;
inline constexpr std::size_t kDeskCodebookSize = 4096;

enum class Quantile { p50 = 0, p90 = 1, p95 = 2, p99 = 3 };

inline constexpr std::array<double, 4> kQuantileLevels = {0.50, 0.90, 0.95, 0.99};

std::string_view to_string(Quantile q);
// Accepts "p50", "p90", "p95", "p99".
std::optional<Quantile> parse_quantile(std::string_view name);

struct KMeansConfig {
    std::size_t k = kDeskCodebookSize;
    std::size_t max_iters = 25;
    std::uint64_t seed = 42;
    // Empty means full-batch Lloyd; otherwise mini-batch of this many samples.
    std::optional<std::size_t> batch_size;
    // Stop once the relative objective decrease falls to or below this value.
    double convergence_tol = 1e-4;
    // Prune the Lloyd assignment step (half-gap test plus a coarse centroid
    // index). The resulting codebook is bit-identical to the plain
    // exhaustive path.
    bool accelerate = true;
};

struct BuildMeta {
    std::uint64_t seed = 0;
    std::uint32_t iterations = 0;
    double objective = 0.0;

    bool operator==(const BuildMeta&) const = default;
};

struct Nearest {
    std::size_t index = 0;
    double distance = 0.0;

    bool operator==(const Nearest&) const = default;
};

// K centroids of dimension D with the statistics of the assignment that
// produced them. Immutable once built.
class Codebook {
public:
    Codebook() = default;
    Codebook(std::size_t dim, std::vector<float> centroids, std::vector<std::uint64_t> counts,
             std::array<double, 4> dist_quantiles, BuildMeta meta);

    std::size_t size() const { return counts_.size(); }
    std::size_t dim() const { return dim_; }
    ConstVec centroid(std::size_t i) const { return {centroids_.data() + i * dim_, dim_}; }
    const std::vector<float>& centroids() const { return centroids_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    const std::array<double, 4>& dist_quantiles() const { return quantiles_; }
    double quantile(Quantile q) const { return quantiles_[static_cast<std::size_t>(q)]; }
    const BuildMeta& meta() const { return meta_; }

    // Exact nearest centroid through the coarse index (falls back to a
    // full scan for small K). Always equal to nearest_centroid().
    Nearest search(ConstVec x) const;
    bool has_coarse_index() const { return search_ && search_->indexed(); }

    bool operator==(const Codebook& other) const {
        return dim_ == other.dim_ && centroids_ == other.centroids_ &&
               counts_ == other.counts_ && quantiles_ == other.quantiles_ &&
               meta_ == other.meta_;
    }

private:
    std::size_t dim_ = 0;
    std::vector<float> centroids_;
    std::vector<std::uint64_t> counts_;
    std::array<double, 4> quantiles_{};
    BuildMeta meta_;
    std::shared_ptr<const detail::CentroidSearch> search_;
};

// Optional diagnostics from kmeans_build.
struct KMeansTrace {
    // Full-batch: sum of squared nearest-centroid distances after each
    // assignment step, ending with the final assignment.
    std::vector<double> objective;
    // Number of point-to-centroid distance evaluations in assignment steps.
    std::uint64_t distance_evals = 0;
};

Codebook kmeans_build(const LatentCorpus& corpus, const KMeansConfig& config,
                      KMeansTrace* trace = nullptr);

// Reference exhaustive scan; ties go to the lowest index.
Nearest nearest_centroid(ConstVec x, const Codebook& cb);

struct ProjectionOutcome {
    FeatureVector vector;
    std::size_t centroid_index = 0;
    double original_distance = 0.0;
    bool clipped = false;
};

// Keeps x when it lies within tau of its nearest centroid c; otherwise moves
// it along (x - c) so that its distance to c becomes tau.
ProjectionOutcome threshold_replace(ConstVec x, const Codebook& cb, double tau);

struct FrameProjectionStats {
    std::size_t clipped = 0;
    std::size_t total = 0;
    double max_distance_before = 0.0;
    double max_distance_after = 0.0;
    double mean_distance_before = 0.0;
};

LatentFrame project_frame(const LatentFrame& frame, const Codebook& cb, double tau,
                          FrameProjectionStats* stats = nullptr);

double suggest_tau(const Codebook& cb, Quantile q = Quantile::p99);

// Linear-interpolated quantiles (type 7) of an unsorted sample.
std::array<double, 4> distance_quantiles(std::vector<double> sample);

}  // namespace driftguard
