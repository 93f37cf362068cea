#include "driftguard/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "driftguard/error.hpp"
#include "driftguard/parallel.hpp"
#include "driftguard/random.hpp"

namespace driftguard {

namespace {

constexpr std::size_t kChunk = 4096;
constexpr std::size_t kMinIndexedCodebook = 64;
// Bounds must beat the candidate by this relative margin before a distance
// evaluation is skipped, far above the rounding error of the double kernel.
constexpr double kPruneMargin = 1e-9;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

detail::SearchHit scan_one(const float* x, const float* centroids, std::size_t k, std::size_t dim) {
    detail::SearchHit hit{0, kInf};
    for (std::size_t j = 0; j < k; ++j) {
        const double d = squared_l2_unchecked(x, centroids + j * dim, dim);
        if (d < hit.squared) {
            hit.squared = d;
            hit.index = static_cast<std::uint32_t>(j);
        }
    }
    return hit;
}

Nearest to_nearest(const detail::SearchHit& hit) { return {hit.index, std::sqrt(hit.squared)}; }

// Sum of per-chunk partial sums, combined in chunk order.
double ordered_sum(const std::vector<double>& partials) {
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

void require_tau(double tau) {
    if (!std::isfinite(tau) || tau < 0.0) {
        throw InvalidArgument("threshold must be finite and non-negative, got " +
                              std::to_string(tau));
    }
}

// ---------------------------------------------------------------------------
// K-Means++ seeding. Distances to the nearest chosen seed are kept per point;
// a point is skipped when the triangle inequality proves the new seed cannot
// be strictly closer, which leaves the sequence of draws unchanged.

std::vector<float> kmeanspp_seed(const LatentCorpus& corpus, std::size_t k, std::uint64_t seed) {
    const std::size_t n = corpus.size();
    const std::size_t dim = corpus.dim();
    const float* data = corpus.data().data();
    SplitMix64 rng(counter_rng::hash(seed, 0x6b6d2b2bULL));

    std::vector<float> centers;
    centers.reserve(k * dim);
    std::vector<double> min_sq(n, kInf);
    std::vector<std::uint32_t> owner(n, 0);
    std::vector<double> chunk_sums(chunk_count(n), 0.0);
    std::vector<double> quarter_gap_sq;  // (gap from the newest seed to each earlier seed / 2)^2

    std::size_t pick = rng.below(n);
    for (std::size_t c = 0; c < k; ++c) {
        const float* chosen = data + pick * dim;
        centers.insert(centers.end(), chosen, chosen + dim);

        quarter_gap_sq.assign(c, 0.0);
        for (std::size_t j = 0; j < c; ++j) {
            quarter_gap_sq[j] = 0.25 * squared_l2_unchecked(chosen, centers.data() + j * dim, dim);
        }

        parallel_for(0, static_cast<std::int64_t>(chunk_sums.size()), [&](std::int64_t ch) {
            const std::size_t begin = static_cast<std::size_t>(ch) * kChunk;
            const std::size_t end = std::min(n, begin + kChunk);
            double partial = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                const double cur = min_sq[i];
                if (c > 0) {
                    // d(x, new) >= gap - d(x, owner); no strict improvement
                    // possible once gap >= 2 d(x, owner).
                    if (quarter_gap_sq[owner[i]] > cur * (1.0 + 4.0 * kPruneMargin)) {
                        partial += cur;
                        continue;
                    }
                }
                const double d = squared_l2_unchecked(data + i * dim, chosen, dim);
                if (d < cur) {
                    min_sq[i] = d;
                    owner[i] = static_cast<std::uint32_t>(c);
                }
                partial += min_sq[i];
            }
            chunk_sums[static_cast<std::size_t>(ch)] = partial;
        });

        if (c + 1 == k) break;

        const double total = ordered_sum(chunk_sums);
        if (!(total > 0.0)) {
            // Every point coincides with a seed; fall back to a uniform draw.
            pick = rng.below(n);
            continue;
        }
        double target = rng.uniform() * total;
        std::size_t ch = 0;
        for (; ch + 1 < chunk_sums.size(); ++ch) {
            if (target < chunk_sums[ch]) break;
            target -= chunk_sums[ch];
        }
        const std::size_t begin = ch * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        pick = end - 1;
        for (std::size_t i = begin; i < end; ++i) {
            if (min_sq[i] > 0.0 && target < min_sq[i]) {
                pick = i;
                break;
            }
            target -= min_sq[i];
        }
        // Rounding can walk past the last positive weight; take the last one.
        if (min_sq[pick] == 0.0) {
            for (std::size_t i = end; i-- > begin;) {
                if (min_sq[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
    }
    return centers;
}

// ---------------------------------------------------------------------------
// Full-batch Lloyd. The accelerated assignment keeps a point's centroid when
// it lies within half the gap to that centroid's closest neighbour, and
// otherwise asks the indexed search; both give the exhaustive answer.

struct AssignState {
    std::vector<std::uint32_t> assign;
    std::vector<double> dist;  // exact distance to the assigned centroid
};

struct AssignSummary {
    double objective = 0.0;
    std::uint64_t changed = 0;
    std::uint64_t evals = 0;
};

AssignSummary assign_step(const LatentCorpus& corpus, const std::vector<float>& centroids,
                          std::size_t k, AssignState& st, bool first, bool accelerate) {
    const std::size_t n = corpus.size();
    const std::size_t dim = corpus.dim();
    const float* data = corpus.data().data();
    const float* cents = centroids.data();

    const bool indexed = accelerate && k >= kMinIndexedCodebook;
    const detail::CentroidSearch search =
        accelerate ? detail::CentroidSearch(cents, k, dim, indexed) : detail::CentroidSearch();
    std::vector<double> half_gap;
    if (accelerate && !first && k > 1) {
        half_gap = search.nearest_neighbour_gaps();
        for (double& g : half_gap) g = 0.5 * std::sqrt(g);
    }

    const std::size_t chunks = chunk_count(n);
    std::vector<double> obj(chunks, 0.0);
    std::vector<std::uint64_t> changed(chunks, 0), evals(chunks, 0);

    parallel_for_dynamic(0, static_cast<std::int64_t>(chunks), [&](std::int64_t ch) {
        const std::size_t c = static_cast<std::size_t>(ch);
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        double partial = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const float* x = data + i * dim;
            if (!half_gap.empty()) {
                const std::uint32_t a = st.assign[i];
                const double sq = squared_l2_unchecked(x, cents + a * dim, dim);
                evals[c] += 1;
                if (std::sqrt(sq) < half_gap[a] * (1.0 - kPruneMargin)) {
                    st.dist[i] = std::sqrt(sq);
                    partial += sq;
                    continue;
                }
            }
            detail::SearchHit hit;
            if (accelerate) {
                hit = search.search(x, &evals[c]);
            } else {
                hit = scan_one(x, cents, k, dim);
                evals[c] += k;
            }
            const std::uint32_t index = hit.index;
            const double sq = hit.squared;
            if (first || index != st.assign[i]) changed[c] += 1;
            st.assign[i] = index;
            st.dist[i] = std::sqrt(sq);
            partial += sq;
        }
        obj[c] = partial;
    });

    AssignSummary s;
    s.objective = ordered_sum(obj);
    for (std::size_t c = 0; c < chunks; ++c) {
        s.changed += changed[c];
        s.evals += evals[c];
    }
    return s;
}

// Recomputes centroids as member means (members summed in ascending point
// order) and repairs empty clusters.
void update_step(const LatentCorpus& corpus, std::vector<float>& centroids, std::size_t k,
                 const AssignState& st) {
    const std::size_t n = corpus.size();
    const std::size_t dim = corpus.dim();
    const float* data = corpus.data().data();

    std::vector<std::size_t> offsets(k + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offsets[st.assign[i] + 1] += 1;
    for (std::size_t j = 0; j < k; ++j) offsets[j + 1] += offsets[j];
    std::vector<std::uint32_t> order(n);
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::size_t i = 0; i < n; ++i) {
            order[cursor[st.assign[i]]++] = static_cast<std::uint32_t>(i);
        }
    }

    parallel_for(0, static_cast<std::int64_t>(k), [&](std::int64_t jj) {
        const std::size_t j = static_cast<std::size_t>(jj);
        const std::size_t count = offsets[j + 1] - offsets[j];
        if (count == 0) return;
        std::vector<double> sum(dim, 0.0);
        for (std::size_t p = offsets[j]; p < offsets[j + 1]; ++p) {
            const float* x = data + static_cast<std::size_t>(order[p]) * dim;
            for (std::size_t d = 0; d < dim; ++d) sum[d] += x[d];
        }
        for (std::size_t d = 0; d < dim; ++d) {
            centroids[j * dim + d] = static_cast<float>(sum[d] / static_cast<double>(count));
        }
    });

    std::vector<std::size_t> empty;
    for (std::size_t j = 0; j < k; ++j) {
        if (offsets[j + 1] == offsets[j]) empty.push_back(j);
    }
    if (!empty.empty()) {
        // Farthest points first, lowest index on ties.
        const std::size_t take = std::min(n, empty.size());
        std::vector<std::uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                          [&](std::uint32_t a, std::uint32_t b) {
                              if (st.dist[a] != st.dist[b]) return st.dist[a] > st.dist[b];
                              return a < b;
                          });
        for (std::size_t e = 0; e < take; ++e) {
            const float* x = data + static_cast<std::size_t>(idx[e]) * dim;
            std::copy(x, x + dim, centroids.begin() + static_cast<std::ptrdiff_t>(empty[e] * dim));
        }
    }
}

// ---------------------------------------------------------------------------
// Mini-batch K-Means with per-centroid learning rate 1/count.

void minibatch_iterations(const LatentCorpus& corpus, std::vector<float>& centroids, std::size_t k,
                          const KMeansConfig& config, std::uint32_t& iterations,
                          KMeansTrace* trace) {
    const std::size_t n = corpus.size();
    const std::size_t dim = corpus.dim();
    const std::size_t batch = *config.batch_size;
    std::vector<double> work(centroids.begin(), centroids.end());
    std::vector<std::uint64_t> seen(k, 0);
    std::vector<std::size_t> sample(batch);
    std::vector<std::uint32_t> assigned(batch);
    std::vector<double> sq(batch);

    for (std::size_t it = 0; it < config.max_iters; ++it) {
        SplitMix64 rng(counter_rng::hash(config.seed, 0x6d696e69ULL, it));
        for (auto& s : sample) s = rng.below(n);

        const detail::CentroidSearch search(centroids.data(), k, dim, false);
        parallel_for(0, static_cast<std::int64_t>(batch), [&](std::int64_t bb) {
            const std::size_t b = static_cast<std::size_t>(bb);
            const detail::SearchHit hit = search.exhaustive(corpus.row(sample[b]).data());
            assigned[b] = hit.index;
            sq[b] = hit.squared;
        });

        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t j = assigned[b];
            seen[j] += 1;
            const double eta = 1.0 / static_cast<double>(seen[j]);
            const ConstVec x = corpus.row(sample[b]);
            for (std::size_t d = 0; d < dim; ++d) {
                work[j * dim + d] = (1.0 - eta) * work[j * dim + d] + eta * x[d];
            }
        }
        for (std::size_t v = 0; v < work.size(); ++v) centroids[v] = static_cast<float>(work[v]);

        if (trace) {
            trace->objective.push_back(std::accumulate(sq.begin(), sq.end(), 0.0));
            trace->distance_evals += static_cast<std::uint64_t>(batch) * k;
        }
        iterations = static_cast<std::uint32_t>(it + 1);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Quantile q) {
    switch (q) {
        case Quantile::p50: return "p50";
        case Quantile::p90: return "p90";
        case Quantile::p95: return "p95";
        case Quantile::p99: return "p99";
    }
    return "p99";
}

std::optional<Quantile> parse_quantile(std::string_view name) {
    if (name == "p50") return Quantile::p50;
    if (name == "p90") return Quantile::p90;
    if (name == "p95") return Quantile::p95;
    if (name == "p99") return Quantile::p99;
    return std::nullopt;
}

std::array<double, 4> distance_quantiles(std::vector<double> sample) {
    std::array<double, 4> out{};
    if (sample.empty()) return out;
    std::sort(sample.begin(), sample.end());
    const double last = static_cast<double>(sample.size() - 1);
    for (std::size_t q = 0; q < kQuantileLevels.size(); ++q) {
        const double pos = kQuantileLevels[q] * last;
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sample.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        out[q] = sample[lo] + frac * (sample[hi] - sample[lo]);
    }
    // Interpolation cannot break ordering on sorted input, but keep it exact.
    for (std::size_t q = 1; q < out.size(); ++q) out[q] = std::max(out[q], out[q - 1]);
    return out;
}

Codebook::Codebook(std::size_t dim, std::vector<float> centroids, std::vector<std::uint64_t> counts,
                   std::array<double, 4> dist_quantiles, BuildMeta meta)
    : dim_(dim),
      centroids_(std::move(centroids)),
      counts_(std::move(counts)),
      quantiles_(dist_quantiles),
      meta_(meta) {
    if (dim_ == 0) throw InvalidArgument("codebook dimension must be >= 1");
    if (counts_.empty()) throw InvalidArgument("codebook needs at least one centroid");
    if (centroids_.size() != counts_.size() * dim_) {
        throw InvalidArgument("codebook holds " + std::to_string(centroids_.size()) +
                              " centroid values, expected " +
                              std::to_string(counts_.size() * dim_));
    }
    if (!all_finite(centroids_)) throw InvalidArgument("codebook centroid is non-finite");
    for (std::size_t q = 0; q < quantiles_.size(); ++q) {
        if (!std::isfinite(quantiles_[q]) || quantiles_[q] < 0.0) {
            throw InvalidArgument("codebook distance quantile must be finite and >= 0");
        }
        if (q > 0 && quantiles_[q] < quantiles_[q - 1]) {
            throw InvalidArgument("codebook distance quantiles must be non-decreasing");
        }
    }
    search_ = std::make_shared<const detail::CentroidSearch>(centroids_.data(), size(), dim_,
                                                             size() >= kMinIndexedCodebook);
}

Nearest Codebook::search(ConstVec x) const {
    if (x.size() != dim_) {
        throw InvalidArgument("query dimension " + std::to_string(x.size()) +
                              " does not match codebook dimension " + std::to_string(dim_));
    }
    return to_nearest(search_->search(x.data()));
}

Codebook kmeans_build(const LatentCorpus& corpus, const KMeansConfig& config, KMeansTrace* trace) {
    const std::size_t n = corpus.size();
    const std::size_t dim = corpus.dim();
    if (n == 0) throw InvalidArgument("cannot build a codebook from an empty corpus");
    if (config.k == 0) throw InvalidArgument("k must be >= 1");
    if (config.k > n) {
        throw InvalidArgument("k = " + std::to_string(config.k) + " exceeds corpus size " +
                              std::to_string(n));
    }
    if (config.k > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("k does not fit in 32 bits");
    }
    if (config.max_iters == 0) throw InvalidArgument("max_iters must be >= 1");
    if (config.batch_size && *config.batch_size == 0) {
        throw InvalidArgument("batch size must be >= 1");
    }
    if (!std::isfinite(config.convergence_tol) || config.convergence_tol < 0.0) {
        throw InvalidArgument("convergence tolerance must be finite and >= 0");
    }
    if (!all_finite(corpus.data())) throw InvalidArgument("corpus contains a non-finite value");

    const std::size_t k = config.k;
    if (trace) *trace = {};
    std::vector<float> centroids = kmeanspp_seed(corpus, k, config.seed);

    AssignState st;
    st.assign.assign(n, 0);
    st.dist.assign(n, 0.0);
    std::uint32_t iterations = 0;
    AssignSummary last;

    if (config.batch_size) {
        minibatch_iterations(corpus, centroids, k, config, iterations, trace);
        last = assign_step(corpus, centroids, k, st, /*first=*/true, /*accelerate=*/true);
        if (trace) trace->distance_evals += last.evals;
    } else {
        bool fresh = true;
        double previous = kInf;
        for (std::size_t it = 0;; ++it) {
            last = assign_step(corpus, centroids, k, st, fresh, config.accelerate);
            fresh = false;
            if (trace) {
                trace->objective.push_back(last.objective);
                trace->distance_evals += last.evals;
            }
            const bool stalled = it > 0 && last.changed == 0;
            const bool converged =
                it > 0 && previous - last.objective <= config.convergence_tol * previous;
            if (stalled || converged || it == config.max_iters) break;
            previous = last.objective;
            update_step(corpus, centroids, k, st);
            iterations = static_cast<std::uint32_t>(it + 1);
        }
    }

    std::vector<std::uint64_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) counts[st.assign[i]] += 1;
    const std::array<double, 4> quantiles = distance_quantiles(st.dist);
    return Codebook(dim, std::move(centroids), std::move(counts), quantiles,
                    BuildMeta{config.seed, iterations, last.objective});
}

Nearest nearest_centroid(ConstVec x, const Codebook& cb) {
    if (x.size() != cb.dim()) {
        throw InvalidArgument("query dimension " + std::to_string(x.size()) +
                              " does not match codebook dimension " + std::to_string(cb.dim()));
    }
    return to_nearest(scan_one(x.data(), cb.centroids().data(), cb.size(), cb.dim()));
}

ProjectionOutcome threshold_replace(ConstVec x, const Codebook& cb, double tau) {
    require_tau(tau);
    const Nearest near = cb.search(x);
    ProjectionOutcome out;
    out.centroid_index = near.index;
    out.original_distance = near.distance;
    out.clipped = near.distance > tau;
    if (!out.clipped) {
        out.vector = FeatureVector(x);
        return out;
    }
    const ConstVec c = cb.centroid(near.index);
    const double scale = tau / near.distance;
    std::vector<float> moved(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double offset = static_cast<double>(x[d]) - static_cast<double>(c[d]);
        moved[d] = static_cast<float>(static_cast<double>(c[d]) + scale * offset);
    }
    // Float rounding can land a hair outside tau; step inward one ulp at a time.
    while (l2_distance(moved, c) > tau) {
        for (std::size_t d = 0; d < moved.size(); ++d) moved[d] = std::nextafter(moved[d], c[d]);
    }
    out.vector = FeatureVector(std::move(moved));
    return out;
}

LatentFrame project_frame(const LatentFrame& frame, const Codebook& cb, double tau,
                          FrameProjectionStats* stats) {
    require_tau(tau);
    if (frame.dim() != cb.dim()) {
        throw InvalidArgument("frame dimension " + std::to_string(frame.dim()) +
                              " does not match codebook dimension " + std::to_string(cb.dim()));
    }
    const std::size_t s = frame.tokens();
    std::vector<float> data(frame.data());
    std::vector<double> before(s), after(s);
    std::vector<unsigned char> clipped(s, 0);

    parallel_for(0, static_cast<std::int64_t>(s), [&](std::int64_t tt) {
        const std::size_t t = static_cast<std::size_t>(tt);
        const ProjectionOutcome r = threshold_replace(frame.token(t), cb, tau);
        std::copy(r.vector.values().begin(), r.vector.values().end(),
                  data.begin() + static_cast<std::ptrdiff_t>(t * frame.dim()));
        before[t] = r.original_distance;
        clipped[t] = r.clipped ? 1 : 0;
        after[t] = r.clipped ? l2_distance(r.vector, cb.centroid(r.centroid_index)) : r.original_distance;
    });

    if (stats) {
        *stats = {};
        stats->total = s;
        double sum = 0.0;
        for (std::size_t t = 0; t < s; ++t) {
            stats->clipped += clipped[t];
            stats->max_distance_before = std::max(stats->max_distance_before, before[t]);
            stats->max_distance_after = std::max(stats->max_distance_after, after[t]);
            sum += before[t];
        }
        stats->mean_distance_before = sum / static_cast<double>(s);
    }
    return LatentFrame(s, frame.dim(), std::move(data), frame.frame_index());
}

double suggest_tau(const Codebook& cb, Quantile q) { return cb.quantile(q); }

}  // namespace driftguard
