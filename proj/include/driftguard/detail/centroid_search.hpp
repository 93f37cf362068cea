#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace driftguard::detail {

// Rows stored transposed in blocks of kWidth so one query can be compared
// against kWidth rows per pass. Each lane sums squared differences in
// dimension order, so results equal squared_l2_unchecked exactly.
class BlockedRows {
public:
    static constexpr std::size_t kWidth = 16;

    BlockedRows() = default;
    // All `count` rows of a row-major buffer.
    BlockedRows(const float* rows, std::size_t count, std::size_t dim);
    // Only the listed rows; id(i) maps back to the original row index.
    BlockedRows(const float* rows, std::span<const std::uint32_t> ids, std::size_t dim);

    std::size_t size() const { return count_; }
    std::size_t blocks() const { return (count_ + kWidth - 1) / kWidth; }
    std::uint32_t id(std::size_t i) const { return ids_.empty() ? static_cast<std::uint32_t>(i) : ids_[i]; }

    // out[l] = squared distance from x to row b * kWidth + l. Lanes past the
    // last row hold the distance to the zero vector.
    void block_distances(const float* x, std::size_t b, double* out) const;

private:
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> data_;  // [block][dim][lane]
    std::vector<std::uint32_t> ids_;
};

struct SearchHit {
    std::uint32_t index = 0;
    double squared = 0.0;
};

// Exact nearest-row search over a fixed set of centroids, with an optional
// two-level index (centroids grouped under coarse centers with covering
// radii). Indexed and exhaustive searches return identical hits: lowest
// squared distance, ties to the lowest index.
class CentroidSearch {
public:
    CentroidSearch() = default;
    CentroidSearch(const float* centroids, std::size_t k, std::size_t dim, bool build_index);

    std::size_t size() const { return k_; }
    bool indexed() const { return !groups_.empty(); }

    SearchHit exhaustive(const float* x) const;
    // Falls back to exhaustive() when no index was built. `evals`, when
    // given, is incremented by the number of centroid distances computed.
    SearchHit search(const float* x, std::uint64_t* evals = nullptr) const;

    // Squared distance from each centroid to its closest other centroid.
    std::vector<double> nearest_neighbour_gaps() const;

private:
    struct Group {
        double radius = 0.0;
        BlockedRows members;
    };

    std::size_t k_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> rows_;
    BlockedRows all_;
    std::vector<float> centers_;  // row-major, one per group
    BlockedRows blocked_centers_;
    std::vector<Group> groups_;
};

}  // namespace driftguard::detail
