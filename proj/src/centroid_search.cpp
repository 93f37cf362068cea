#include "driftguard/detail/centroid_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "driftguard/latent.hpp"
#include "driftguard/parallel.hpp"

namespace driftguard::detail {

namespace {

using v8d = double __attribute__((vector_size(64)));
using v8f = float __attribute__((vector_size(32)));

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kCoarseIters = 6;
// Covering-radius bounds are widened by this relative slack before a group is
// skipped, far above the rounding error of the double kernel.
constexpr double kBoundSlack = 1e-9;

}  // namespace

BlockedRows::BlockedRows(const float* rows, std::size_t count, std::size_t dim)
    : count_(count), dim_(dim), data_(blocks() * kWidth * dim, 0.0f) {
    for (std::size_t i = 0; i < count; ++i) {
        float* blk = data_.data() + (i / kWidth) * kWidth * dim;
        for (std::size_t d = 0; d < dim; ++d) blk[d * kWidth + i % kWidth] = rows[i * dim + d];
    }
}

BlockedRows::BlockedRows(const float* rows, std::span<const std::uint32_t> ids, std::size_t dim)
    : count_(ids.size()), dim_(dim), data_(blocks() * kWidth * dim, 0.0f), ids_(ids.begin(), ids.end()) {
    for (std::size_t i = 0; i < count_; ++i) {
        float* blk = data_.data() + (i / kWidth) * kWidth * dim;
        const float* row = rows + static_cast<std::size_t>(ids_[i]) * dim;
        for (std::size_t d = 0; d < dim; ++d) blk[d * kWidth + i % kWidth] = row[d];
    }
}

void BlockedRows::block_distances(const float* x, std::size_t b, double* out) const {
    static_assert(kWidth == 16);
    const float* blk = data_.data() + b * kWidth * dim_;
    v8d lo = {0, 0, 0, 0, 0, 0, 0, 0};
    v8d hi = lo;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double xd = x[d];
        v8f c0, c1;
        std::memcpy(&c0, blk + d * kWidth, sizeof c0);
        std::memcpy(&c1, blk + d * kWidth + 8, sizeof c1);
        const v8d t0 = xd - __builtin_convertvector(c0, v8d);
        const v8d t1 = xd - __builtin_convertvector(c1, v8d);
        lo += t0 * t0;
        hi += t1 * t1;
    }
    std::memcpy(out, &lo, sizeof lo);
    std::memcpy(out + 8, &hi, sizeof hi);
}

CentroidSearch::CentroidSearch(const float* centroids, std::size_t k, std::size_t dim, bool build_index)
    : k_(k), dim_(dim), rows_(centroids, centroids + k * dim), all_(centroids, k, dim) {
    if (!build_index || k < 2) return;

    const std::size_t g = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    std::vector<float> centers;
    centers.reserve(g * dim);
    for (std::size_t i = 0; i < g; ++i) {
        const float* c = centroids + (i * k / g) * dim;
        centers.insert(centers.end(), c, c + dim);
    }

    std::vector<std::uint32_t> owner(k, 0);
    auto assign_owners = [&] {
        for (std::size_t j = 0; j < k; ++j) {
            double best = kInf;
            for (std::size_t c = 0; c < g; ++c) {
                const double d = squared_l2_unchecked(centroids + j * dim, centers.data() + c * dim, dim);
                if (d < best) {
                    best = d;
                    owner[j] = static_cast<std::uint32_t>(c);
                }
            }
        }
    };
    for (int it = 0; it < kCoarseIters; ++it) {
        assign_owners();
        std::vector<double> sum(g * dim, 0.0);
        std::vector<std::size_t> count(g, 0);
        for (std::size_t j = 0; j < k; ++j) {
            count[owner[j]] += 1;
            for (std::size_t d = 0; d < dim; ++d) sum[owner[j] * dim + d] += centroids[j * dim + d];
        }
        for (std::size_t c = 0; c < g; ++c) {
            if (count[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) {
                centers[c * dim + d] = static_cast<float>(sum[c * dim + d] / static_cast<double>(count[c]));
            }
        }
    }
    assign_owners();

    std::vector<std::vector<std::uint32_t>> members(g);
    for (std::size_t j = 0; j < k; ++j) members[owner[j]].push_back(static_cast<std::uint32_t>(j));
    for (std::size_t c = 0; c < g; ++c) {
        if (members[c].empty()) continue;
        Group grp;
        const float* center = centers.data() + c * dim;
        for (std::uint32_t j : members[c]) {
            grp.radius = std::max(grp.radius, std::sqrt(squared_l2_unchecked(center, centroids + j * dim, dim)));
        }
        grp.members = BlockedRows(centroids, members[c], dim);
        centers_.insert(centers_.end(), center, center + dim);
        groups_.push_back(std::move(grp));
    }
    blocked_centers_ = BlockedRows(centers_.data(), groups_.size(), dim);
}

SearchHit CentroidSearch::exhaustive(const float* x) const {
    SearchHit hit{0, kInf};
    double out[BlockedRows::kWidth];
    for (std::size_t b = 0; b < all_.blocks(); ++b) {
        all_.block_distances(x, b, out);
        const std::size_t base = b * BlockedRows::kWidth;
        const std::size_t lanes = std::min(BlockedRows::kWidth, k_ - base);
        for (std::size_t l = 0; l < lanes; ++l) {
            if (out[l] < hit.squared) {
                hit.squared = out[l];
                hit.index = static_cast<std::uint32_t>(base + l);
            }
        }
    }
    return hit;
}

SearchHit CentroidSearch::search(const float* x, std::uint64_t* evals) const {
    if (groups_.empty()) {
        if (evals) *evals += k_;
        return exhaustive(x);
    }

    thread_local std::vector<double> center_sq;
    thread_local std::vector<double> lower;
    const std::size_t g = groups_.size();
    center_sq.resize(blocked_centers_.blocks() * BlockedRows::kWidth);
    lower.resize(g);
    for (std::size_t b = 0; b < blocked_centers_.blocks(); ++b) {
        blocked_centers_.block_distances(x, b, center_sq.data() + b * BlockedRows::kWidth);
    }
    std::size_t first = 0;
    for (std::size_t c = 0; c < g; ++c) {
        const double dc = std::sqrt(center_sq[c]);
        const double r = groups_[c].radius;
        lower[c] = dc - r - kBoundSlack * (dc + r);
        if (lower[c] < lower[first]) first = c;
    }

    // Visit order only affects how much is pruned; ties are resolved by index.
    std::uint64_t count = g;
    SearchHit hit{std::numeric_limits<std::uint32_t>::max(), kInf};
    double best_dist = kInf;
    double out[BlockedRows::kWidth];
    auto scan_group = [&](std::size_t c) {
        const BlockedRows& rows = groups_[c].members;
        for (std::size_t b = 0; b < rows.blocks(); ++b) {
            rows.block_distances(x, b, out);
            const std::size_t base = b * BlockedRows::kWidth;
            const std::size_t lanes = std::min(BlockedRows::kWidth, rows.size() - base);
            double block_min = out[0];
            for (std::size_t l = 1; l < BlockedRows::kWidth; ++l) block_min = std::min(block_min, out[l]);
            if (block_min > hit.squared) continue;
            for (std::size_t l = 0; l < lanes; ++l) {
                const std::uint32_t j = rows.id(base + l);
                if (out[l] < hit.squared || (out[l] == hit.squared && j < hit.index)) {
                    hit.squared = out[l];
                    hit.index = j;
                }
            }
        }
        count += rows.size();
        best_dist = std::sqrt(hit.squared);
    };
    scan_group(first);
    for (std::size_t c = 0; c < g; ++c) {
        if (c != first && !(lower[c] > best_dist)) scan_group(c);
    }
    if (evals) *evals += count;
    return hit;
}

std::vector<double> CentroidSearch::nearest_neighbour_gaps() const {
    std::vector<double> gaps(k_, kInf);
    parallel_for(0, static_cast<std::int64_t>(k_), [&](std::int64_t jj) {
        const std::size_t j = static_cast<std::size_t>(jj);
        const float* row = rows_.data() + j * dim_;
        double out[BlockedRows::kWidth];
        for (std::size_t b = 0; b < all_.blocks(); ++b) {
            all_.block_distances(row, b, out);
            const std::size_t base = b * BlockedRows::kWidth;
            const std::size_t lanes = std::min(BlockedRows::kWidth, k_ - base);
            for (std::size_t l = 0; l < lanes; ++l) {
                if (base + l != j) gaps[j] = std::min(gaps[j], out[l]);
            }
        }
    });
    return gaps;
}

}  // namespace driftguard::detail
